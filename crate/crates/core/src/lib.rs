//! Pattern similarity-based forecasting (PSFM) for seasonal monthly series.
//!
//! Sequences of a monthly demand series are encoded as normalized x- and
//! y-patterns ([`codec`]); a forecast y-pattern is a similarity-weighted
//! average of historical y-patterns ([`models`]); hyperparameters come from a
//! cross-validated grid search ([`tuner`]); [`diagnostics`] checks the
//! similarity assumption and scores forecasts; [`bench`] runs whole corpora.
//!
//! ```
//! use psfm::prelude::*;
//!
//! let series = psfm::synth::synthetic_series("DE", &SyntheticSpec::default(), 7).unwrap();
//! let spec = EncodingSpec::default();
//! let next_year = forecast(&series, &ModelConfig::knn(3), &spec, None).unwrap();
//! assert_eq!(next_year.len(), 12);
//! ```

pub mod bench;
pub mod cli;
pub mod codec;
pub mod diagnostics;
mod error;
pub mod models;
pub mod series;
pub mod synth;
pub mod tuner;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::codec::{
        build_pairs, decode_y, encode_x, encode_y, CodingMode, CodingVariables, EncodingSpec,
        PatternDataset, PatternDefinition,
    };
    pub use crate::diagnostics::{
        chi_squared_independence, distance_samples, error_metrics, seasonal_naive,
    };
    pub use crate::models::{forecast, weights, ModelConfig, ModelKind, WeightVector};
    pub use crate::series::{
        load_csv, split_train_test, MonthlyLoadSeries, SeriesCollection, YearMonth,
    };
    pub use crate::synth::SyntheticSpec;
    pub use crate::tuner::{grid_search, loocv_error, GridSpec, TuneResult};
    pub use crate::{Error, Result};
}

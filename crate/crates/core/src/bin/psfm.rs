fn main() {
    std::process::exit(psfm::cli::run(std::env::args_os()));
}

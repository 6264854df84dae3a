fn main() {
    std::process::exit(structcorr::cli::run(std::env::args_os()));
}

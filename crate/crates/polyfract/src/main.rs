fn main() {
    std::process::exit(polyfract::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(histokit::cli::run(std::env::args_os()));
}

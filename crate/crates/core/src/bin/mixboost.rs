fn main() {
    std::process::exit(mixboost::cli::run(std::env::args_os()));
}

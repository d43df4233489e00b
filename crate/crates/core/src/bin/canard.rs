fn main() {
    std::process::exit(canard::cli::run(std::env::args_os()));
}

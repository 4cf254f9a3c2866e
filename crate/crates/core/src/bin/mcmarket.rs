fn main() {
    std::process::exit(mcmarket::cli::run(std::env::args_os()));
}

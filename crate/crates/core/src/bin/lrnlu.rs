fn main() {
    std::process::exit(lrnlu::cli::run(std::env::args_os()));
}

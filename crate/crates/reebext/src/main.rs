fn main() {
    std::process::exit(reebext::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(hangsim::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(pullin_cli::run(std::env::args_os()));
}

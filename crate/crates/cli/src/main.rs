fn main() {
    std::process::exit(lyhjko_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(pai_cli::run(std::env::args_os()));
}

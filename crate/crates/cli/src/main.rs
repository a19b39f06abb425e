fn main() {
    std::process::exit(subseg_cli::run(std::env::args_os()));
}

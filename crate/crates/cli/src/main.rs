fn main() {
    std::process::exit(fractalmarch_cli::run(std::env::args_os()));
}

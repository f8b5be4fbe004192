fn main() {
    std::process::exit(bilayer_cli::run(std::env::args_os()));
}

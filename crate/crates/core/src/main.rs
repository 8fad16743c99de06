fn main() {
    std::process::exit(vda::cli::run_cli(std::env::args_os()));
}

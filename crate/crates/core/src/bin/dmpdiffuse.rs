fn main() {
    std::process::exit(dmpdiffuse::cli::run_cli(std::env::args_os()));
}

fn main() {
    std::process::exit(adsr_eval::cli::run_cli(std::env::args_os()));
}

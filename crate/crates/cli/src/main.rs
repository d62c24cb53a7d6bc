fn main() {
    std::process::exit(robustkf_cli::run_cli(std::env::args_os()));
}

fn main() {
    std::process::exit(audit_lab::cli::run_cli(std::env::args_os()));
}

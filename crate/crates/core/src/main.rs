fn main() {
    let code = kahler_probe::cli::run_from_args(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}

fn main() {
    std::process::exit(lie_floquet_cli::run_command(std::env::args_os()));
}

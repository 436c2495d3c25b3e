fn main() -> std::process::ExitCode {
    iongate_cli::main_with_args(std::env::args_os())
}

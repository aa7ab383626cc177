fn main() -> std::process::ExitCode {
    dirac_weyl::cli::main_with_args(std::env::args_os())
}

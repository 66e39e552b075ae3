fn main() -> std::process::ExitCode {
    localwick::cli::run(std::env::args_os())
}

fn main() -> std::process::ExitCode {
    walkcomm::cli::run(std::env::args_os())
}

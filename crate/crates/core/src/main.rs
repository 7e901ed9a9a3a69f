fn main() -> std::process::ExitCode {
    trigopt::cli::main()
}

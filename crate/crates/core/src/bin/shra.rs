fn main() -> std::process::ExitCode {
    shra::harness::cli::main()
}

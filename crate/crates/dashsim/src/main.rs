fn main() -> std::process::ExitCode {
    dashsim::cli::main()
}

fn main() -> std::process::ExitCode {
    subnet_factors::cli::main()
}

fn main() -> std::process::ExitCode {
    cnt_core::cli::main()
}

use std::process::ExitCode;

fn main() -> ExitCode {
    mapless_nav::cli::main()
}

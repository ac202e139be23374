use std::process::ExitCode;

fn main() -> ExitCode {
    qst::cli::main()
}

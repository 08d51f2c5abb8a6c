use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(batchpred::cli::main())
}

use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let outcome = gatecast::cli::run_command(&args);
    println!("{}", outcome.stdout);
    eprintln!("{}", outcome.stderr);
    ExitCode::from(outcome.exit_code as u8)
}

use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match gradcode::cli::run(std::env::args_os(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().trim_end());
            ExitCode::from(e.exit_code())
        }
    }
}

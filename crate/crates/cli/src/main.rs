use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use ssmax_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match execute(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            // A closed pipe is not worth a panic.
            let _ = stdout.write_all(out.stdout.as_bytes());
            let _ = stdout.flush();
            eprintln!("wall time: {:.3}s", started.elapsed().as_secs_f64());
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

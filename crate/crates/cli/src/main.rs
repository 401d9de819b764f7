use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pap_evolve::{configure_threads, run_path, selftest::selftest};

#[derive(Parser)]
#[command(
    name = "pap-evolve",
    version,
    about = "Pseudo almost periodic mild solution experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key=value config file.
    Run { config: PathBuf },
    /// Run the fast invariant suite.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let code = match cli.command {
        Command::Run { config } => run_path(&config, &mut std::io::stderr()),
        Command::Selftest => {
            let out = selftest(None);
            print!("{}", out.summary());
            i32::from(!out.passed())
        }
    };
    ExitCode::from(code as u8)
}

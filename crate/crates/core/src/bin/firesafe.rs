use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use firesafe::cli::{self, ModemTarget, ReportKind};

#[derive(Parser)]
#[command(name = "firesafe", version, about = "Fire-safety controller simulator")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and print its canonical form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a scenario and write the JSON Lines transcript.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `inproc` or `tcp:<host:port>`.
        #[arg(long, default_value = "inproc")]
        modem: ModemTarget,
    },
    /// Serve the emulated GSM modem over TCP.
    ModemServe {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        faults: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Exit after this many sessions.
        #[arg(long)]
        sessions: Option<usize>,
    },
    /// Summarize an incident CSV or a transcript.
    Report {
        #[arg(long)]
        kind: ReportKind,
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (mut out, mut err) = (io::stdout(), io::stderr());
    let status = match args.command {
        Command::Validate { config } => cli::cmd_validate(&config, &mut out, &mut err),
        Command::Run { config, scenario, out: path, modem } => {
            cli::cmd_run(&config, &scenario, &path, &modem, &mut out, &mut err)
        }
        Command::ModemServe { listen, faults, log, sessions } => cli::cmd_modem_serve(
            &listen,
            faults.as_deref(),
            log.as_deref(),
            sessions,
            &mut out,
            &mut err,
        ),
        Command::Report { kind, input } => cli::cmd_report(kind, &input, &mut out, &mut err),
    };
    ExitCode::from(status.code() as u8)
}

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use mminf_qsd::cli::{self, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let record = cli::execute(&cli);
    eprintln!("{}", cli::summary(&record));
    let out = record.render(cli.format);
    if std::io::stdout().write_all(out.as_bytes()).is_err() {
        return ExitCode::from(1);
    }
    ExitCode::from(record.exit_code() as u8)
}

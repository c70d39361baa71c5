mod args;
mod commands;
mod manifest;
mod resolve;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};

/// Exit code for invalid method configuration or usage.
const EXIT_CONFIG: u8 = 2;
/// Exit code for unreadable or invalid input data.
const EXIT_DATA: u8 = 3;

fn report(kind: &str, code: u8, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "exit_code": code, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("usage", EXIT_CONFIG, e.to_string()),
    };

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return report("config", EXIT_CONFIG, e.to_string());
        }
    }

    let result = match &cli.command {
        Command::Score(a) => commands::score(a),
        Command::EvalSts(a) => commands::eval_sts(a),
        Command::EvalCls(a) => commands::eval_cls(a),
        Command::GraphStats(a) => commands::graph_stats(a),
        Command::CosineSpread(a) => commands::cosine_spread(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(synwmd::Error::Config(msg)) => report("config", EXIT_CONFIG, msg),
        Err(e) => report("data", EXIT_DATA, e.to_string()),
    }
}

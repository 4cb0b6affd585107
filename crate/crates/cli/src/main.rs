mod args;
mod commands;
mod util;

use clap::Parser;

use args::{Cli, Command};
use util::ConfigFile;

fn main() {
    // NCL_THREADS caps the worker pool used by the simulator
    if let Ok(v) = std::env::var("NCL_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    let cfg = match ConfigFile::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    };
    let result = match &cli.command {
        Command::Rates(a) => commands::cmd_rates(&cli.out, &cfg, a),
        Command::Solve(a) => commands::cmd_solve(&cli.out, &cfg, a),
        Command::Simulate(a) => commands::cmd_simulate(&cli.out, &cfg, a),
        Command::Sibuya(a) => commands::cmd_sibuya(&cli.out, &cfg, a),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

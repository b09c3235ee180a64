use clap::Parser;

use matter_transport::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

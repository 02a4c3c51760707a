use clap::Parser;
use gravnet_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("gravnet {}: {e}", cli.command.name());
        std::process::exit(e.exit_code());
    }
}

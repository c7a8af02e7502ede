use clap::Parser;

fn main() {
    let cli = intent_cli::Cli::parse();
    if let Err(e) = intent_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

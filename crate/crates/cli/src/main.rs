use clap::Parser;

fn main() {
    let cli = tailblend_cli::Cli::parse();
    if let Err(e) = tailblend_cli::run(cli) {
        eprintln!("tailblend: {e}");
        std::process::exit(e.exit_code());
    }
}

use clap::Parser;

fn main() {
    let cli = relnet_cli::Cli::parse();
    if let Err(e) = relnet_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

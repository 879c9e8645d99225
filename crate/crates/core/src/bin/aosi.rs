use clap::Parser;

fn main() {
    let cli = aosi::cli::Cli::parse();
    if let Err(e) = aosi::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

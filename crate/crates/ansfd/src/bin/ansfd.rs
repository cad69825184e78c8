use clap::Parser;

fn main() {
    let cli = ansfd::cli::Cli::parse();
    if let Err(err) = ansfd::cli::run_cli(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

use clap::Parser;

fn main() {
    let cli = hscm::cli::Cli::parse();
    if let Err(e) = hscm::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

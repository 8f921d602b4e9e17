use clap::Parser;

fn main() {
    let cli = bscsim::cli::Cli::parse();
    if let Err(e) = bscsim::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

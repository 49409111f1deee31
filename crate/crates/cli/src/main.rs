use clap::Parser;

fn main() {
    let cli = amcg_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = amcg_cli::run(&cli, &mut stdout) {
        eprintln!("amcg: {e}");
        std::process::exit(e.exit_code());
    }
}

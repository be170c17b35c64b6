use clap::Parser;

fn main() {
    let cli = selfintro_cli::Cli::parse();
    let name = cli.command.name();
    match selfintro_cli::run(cli) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("wrote {}", a.display());
            }
            if !outcome.metrics.is_empty() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.metrics).unwrap_or_default()
                );
            }
        }
        Err(e) => {
            eprintln!("selfintro {name}: {e:#}");
            std::process::exit(1);
        }
    }
}

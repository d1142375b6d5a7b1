use clap::Parser;
use hal_cli::{execute, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HAL_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error[{code}]: {e}");
            std::process::exit(code);
        }
    }
}

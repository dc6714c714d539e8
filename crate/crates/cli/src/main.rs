use clap::Parser;
use imstitch_cli::cli::Cli;
use imstitch_cli::error::EXIT_INPUT;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let result = cli
        .into_parts()
        .and_then(|(cmd, cfg)| imstitch_cli::run(cmd, &cfg));
    match result {
        Ok(m) => {
            for o in &m.outputs {
                println!("{o}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

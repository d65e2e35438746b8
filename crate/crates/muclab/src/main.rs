use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = muclab::Cli::parse();
    match muclab::run(&cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("muclab: {e}");
            std::process::exit(muclab::exit_code(&e));
        }
    }
}

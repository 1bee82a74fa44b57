use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = kdnav::cli::Cli::parse();
    if let Err(e) = kdnav::cli::run(cli) {
        eprintln!("kdnav: {e}");
        std::process::exit(e.exit_code());
    }
}

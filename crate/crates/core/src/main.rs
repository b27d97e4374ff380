use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = fflm::cli::Cli::parse();
    if let Err(err) = fflm::cli::run(cli) {
        eprintln!("fflm: {err}");
        std::process::exit(err.exit_code());
    }
}

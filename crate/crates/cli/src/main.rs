fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    std::process::exit(wegnerlab_cli::run_from(std::env::args()));
}

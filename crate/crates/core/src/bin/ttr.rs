fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stdout)
        .init();
    std::process::exit(ttr_core::cli::run(std::env::args_os()));
}

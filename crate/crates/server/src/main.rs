fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    let code = dorepo_server::cli::run(std::env::args_os(), &mut dorepo_server::cli::Io { out: &mut out, err: &mut err });
    std::process::exit(code);
}

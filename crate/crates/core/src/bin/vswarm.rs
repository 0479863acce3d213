use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    vswarm::cli::main_with(std::env::args(), &mut std::io::stdout(), &mut std::io::stderr())
}

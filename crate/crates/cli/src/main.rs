use clap::Parser;

fn main() {
    let cli = match evkit_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version land here too and must stay exit 0
            if err.use_stderr() {
                err.print().expect("stderr");
                std::process::exit(1);
            }
            err.print().expect("stdout");
            std::process::exit(0);
        }
    };
    if let Err(err) = evkit_cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(evkit_cli::exit_code(&err));
    }
}

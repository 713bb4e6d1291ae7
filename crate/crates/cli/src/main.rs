use clap::Parser;

fn main() {
    let cli = ewps_cli::args::Cli::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = ewps_cli::run(&cli, &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}

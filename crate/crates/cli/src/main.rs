use clap::Parser;

fn main() {
    let cli = centripetal_cli::Cli::parse();
    std::process::exit(centripetal_cli::run(cli));
}

use clap::Parser;

fn main() {
    let cli = qcsoc_sim::cli::Cli::parse();
    std::process::exit(qcsoc_sim::cli::run(cli));
}

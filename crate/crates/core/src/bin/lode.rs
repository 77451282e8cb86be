use clap::Parser;

fn main() {
    std::process::exit(lode::cli::run(lode::cli::Cli::parse()));
}

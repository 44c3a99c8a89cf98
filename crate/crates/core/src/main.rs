use clap::Parser;

fn main() {
    let cli = infodyn::cli::Cli::parse();
    std::process::exit(infodyn::cli::execute(cli));
}

use clap::Parser;
use scalemat_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}

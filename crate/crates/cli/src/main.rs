use clap::Parser;
use restartlab_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}

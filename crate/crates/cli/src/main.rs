use clap::Parser;

fn main() {
    std::process::exit(pred_minimax_cli::run(pred_minimax_cli::Cli::parse()));
}

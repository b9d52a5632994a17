use clap::Parser;

fn main() {
    let args = parabolica::cli::Args::parse();
    std::process::exit(parabolica::cli::main_with(args));
}

use clap::Parser;

fn main() {
    let cli = wbo::cli::Cli::parse();
    let code = wbo::cli::run(cli, &mut std::io::stdout());
    std::process::exit(code);
}

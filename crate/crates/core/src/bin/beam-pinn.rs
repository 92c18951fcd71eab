use clap::Parser;

fn main() {
    let cli = beam_pinn::cli::Cli::parse();
    match beam_pinn::cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

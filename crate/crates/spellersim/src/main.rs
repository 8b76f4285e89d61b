use std::process;

fn main() {
    process::exit(spellersim::cli::run(std::env::args()));
}

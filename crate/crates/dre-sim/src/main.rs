use std::process::exit;

fn main() {
    exit(dre_sim::cli::run(std::env::args_os()));
}

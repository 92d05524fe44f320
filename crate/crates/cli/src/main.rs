fn main() {
    std::process::exit(seq_uq_cli::cli::run(std::env::args()));
}

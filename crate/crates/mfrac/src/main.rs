fn main() {
    std::process::exit(mfrac::cli::cli_main(std::env::args()));
}

fn main() {
    std::process::exit(tally_cli::run(std::env::args_os()));
}

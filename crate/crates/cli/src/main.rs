fn main() {
    std::process::exit(ald_harness::cli::run(std::env::args_os()));
}

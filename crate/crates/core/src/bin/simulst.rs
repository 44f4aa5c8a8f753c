fn main() {
    std::process::exit(simulst::harness::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(sgdc::cli::run(std::env::args_os()));
}

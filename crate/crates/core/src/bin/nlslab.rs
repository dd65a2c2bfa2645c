fn main() {
    std::process::exit(nlslab::cli::run(std::env::args_os()));
}

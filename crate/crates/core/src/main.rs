fn main() {
    std::process::exit(goddard_core::cli::run(std::env::args_os()));
}

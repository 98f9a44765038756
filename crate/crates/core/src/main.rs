fn main() {
    std::process::exit(volrisk::cli::run(std::env::args_os()));
}

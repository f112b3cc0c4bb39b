fn main() {
    std::process::exit(obslab::cli::run(std::env::args_os()));
}

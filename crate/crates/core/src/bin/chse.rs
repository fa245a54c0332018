fn main() {
    std::process::exit(chse::cli::run_from_args(std::env::args_os()));
}

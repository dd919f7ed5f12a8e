fn main() {
    std::process::exit(chemokin::cli::run(std::env::args_os()));
}

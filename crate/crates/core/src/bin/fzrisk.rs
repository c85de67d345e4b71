fn main() {
    std::process::exit(fzrisk::cli::run(std::env::args_os()));
}

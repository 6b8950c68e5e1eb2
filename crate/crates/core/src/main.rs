fn main() {
    std::process::exit(rightsize::cli::run(std::env::args_os()));
}

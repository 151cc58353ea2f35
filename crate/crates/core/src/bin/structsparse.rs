fn main() {
    std::process::exit(structsparse::cli::run(std::env::args_os()));
}

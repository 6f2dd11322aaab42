fn main() {
    std::process::exit(lnsum::cli::run(std::env::args_os()));
}

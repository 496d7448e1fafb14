fn main() {
    std::process::exit(msnas::cli::run(std::env::args_os()));
}

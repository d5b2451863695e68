fn main() {
    std::process::exit(detmask::cli::execute(std::env::args_os()));
}

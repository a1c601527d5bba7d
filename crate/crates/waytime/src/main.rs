fn main() {
    std::process::exit(waytime::cli::run(std::env::args_os()));
}

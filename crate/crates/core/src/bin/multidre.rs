fn main() {
    std::process::exit(multidre::cli::run(std::env::args_os()));
}

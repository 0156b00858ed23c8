fn main() {
    std::process::exit(stopgen::cli::run())
}

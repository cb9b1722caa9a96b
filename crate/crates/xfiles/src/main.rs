fn main() {
    std::process::exit(xfiles::cli::run());
}

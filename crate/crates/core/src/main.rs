fn main() {
    std::process::exit(cocoonlab::cli::run());
}

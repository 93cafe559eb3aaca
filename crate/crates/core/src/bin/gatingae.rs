fn main() {
    std::process::exit(gatingae::cli::run());
}

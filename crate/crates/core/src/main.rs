fn main() {
    std::process::exit(privbound::cli::run());
}

fn main() {
    std::process::exit(chbell::cli::run());
}

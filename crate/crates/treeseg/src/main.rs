fn main() {
    std::process::exit(treeseg::cli::run());
}

fn main() {
    std::process::exit(xbarrier::cli::main());
}

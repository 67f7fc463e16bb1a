fn main() {
    std::process::exit(uamfd::cli::main());
}

fn main() {
    std::process::exit(qonn_cli::main_with_args());
}

fn main() {
    std::process::exit(polspec_cli::main_impl());
}

fn main() {
    std::process::exit(storage_risk::cli::main_with_args(std::env::args_os()));
}

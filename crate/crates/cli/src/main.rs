fn main() {
    std::process::exit(hyperdet_cli::main_with_args(std::env::args_os()));
}

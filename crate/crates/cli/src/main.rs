fn main() {
    std::process::exit(metavqe_cli::main_with_args(std::env::args_os()));
}

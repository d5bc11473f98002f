fn main() {
    std::process::exit(sparse_ica::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(btspec::cli::main_with_args(std::env::args_os()));
}

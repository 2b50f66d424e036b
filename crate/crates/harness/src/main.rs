fn main() {
    std::process::exit(fmbench::cli::main_with_args(std::env::args_os()));
}

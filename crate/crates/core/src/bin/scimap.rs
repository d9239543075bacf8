fn main() {
    std::process::exit(scimap::cli::main_with_args(std::env::args_os()));
}

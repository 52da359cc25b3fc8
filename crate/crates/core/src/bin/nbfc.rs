fn main() {
    std::process::exit(nbfc::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(mmshare::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(greenbond::cli::main_with_args(std::env::args_os()));
}

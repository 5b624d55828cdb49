fn main() {
    std::process::exit(ctpurify::cli::main_with_args(std::env::args_os()));
}

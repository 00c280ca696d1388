fn main() {
    std::process::exit(ctxfuse::cli::main_with_args(std::env::args_os()));
}

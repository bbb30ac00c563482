fn main() {
    std::process::exit(weakpairs::cli::main_with_args(std::env::args_os()));
}

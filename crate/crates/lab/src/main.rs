fn main() {
    std::process::exit(hwy_lab::cli::main_with_args(std::env::args_os()));
}

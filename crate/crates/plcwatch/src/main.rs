fn main() {
    std::process::exit(plcwatch::cli::main_with_args(std::env::args_os()));
}

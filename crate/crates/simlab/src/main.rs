fn main() {
    std::process::exit(simlab::cli::main_from_args(std::env::args_os()));
}

fn main() {
    std::process::exit(mlab::cli::main_with_args(std::env::args_os().collect()));
}

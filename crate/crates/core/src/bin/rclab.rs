fn main() {
    std::process::exit(rclab::cli::main_with_args(std::env::args_os()));
}

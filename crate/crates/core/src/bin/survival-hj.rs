fn main() {
    std::process::exit(survival_hj::cli::main_with_args(std::env::args_os()));
}

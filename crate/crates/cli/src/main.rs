fn main() {
    std::process::exit(iscpt_cli::main_with_args(std::env::args_os()));
}

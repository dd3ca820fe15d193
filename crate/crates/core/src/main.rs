fn main() {
    std::process::exit(recirc_core::cli::main_with_args(std::env::args_os()));
}

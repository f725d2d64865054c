fn main() {
    std::process::exit(wteleport::cli::main_with_args(std::env::args_os()));
}

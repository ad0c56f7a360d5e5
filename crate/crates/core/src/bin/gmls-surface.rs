fn main() {
    std::process::exit(gmls_surface::cli::main_with_args(std::env::args_os()));
}

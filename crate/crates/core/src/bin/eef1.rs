fn main() {
    std::process::exit(eef1_core::cli::cli_main(std::env::args_os()));
}

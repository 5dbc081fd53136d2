fn main() {
    std::process::exit(ddr_core::cli::cli_main(std::env::args_os()));
}

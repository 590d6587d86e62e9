fn main() {
    std::process::exit(eos_lab::cli_io::run_cli(std::env::args_os()));
}

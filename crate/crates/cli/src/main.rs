fn main() {
    std::process::exit(snowv_lab_cli::run(std::env::args_os()));
}

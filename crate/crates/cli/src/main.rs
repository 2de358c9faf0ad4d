fn main() {
    std::process::exit(ffevss_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(srunc_cli::run(std::env::args_os()));
}

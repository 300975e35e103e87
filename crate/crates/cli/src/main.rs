fn main() {
    std::process::exit(twosite_cli::run(std::env::args_os()));
}

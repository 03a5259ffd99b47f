fn main() {
    std::process::exit(synwalk_cli::run(std::env::args_os()));
}

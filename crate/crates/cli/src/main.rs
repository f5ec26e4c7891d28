fn main() {
    std::process::exit(satindex_cli::run(std::env::args_os()));
}

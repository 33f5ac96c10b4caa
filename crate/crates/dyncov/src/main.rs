fn main() {
    std::process::exit(dyncov::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(iterlog::run(std::env::args_os()));
}

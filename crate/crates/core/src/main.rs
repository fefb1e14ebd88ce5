fn main() {
    std::process::exit(tagflow::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(presetplan::cli::run(std::env::args_os()));
}

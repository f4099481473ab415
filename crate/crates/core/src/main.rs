fn main() {
    std::process::exit(novelty_wm::cli::main_with_args(std::env::args_os()));
}

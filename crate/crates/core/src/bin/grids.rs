fn main() {
    std::process::exit(grids::cli::run(std::env::args_os()));
}

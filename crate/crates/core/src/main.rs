fn main() {
    std::process::exit(operad_cells::cli::run_from_env());
}

fn main() {
    let code = soilpq::cli::run(std::env::args_os());
    std::process::exit(code);
}

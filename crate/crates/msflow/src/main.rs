fn main() {
    let code = msflow::cli::main_with(std::env::args().collect());
    std::process::exit(code);
}

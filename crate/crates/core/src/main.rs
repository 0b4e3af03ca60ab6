fn main() {
    let code = agglab::cli::main(std::env::args_os());
    std::process::exit(code);
}

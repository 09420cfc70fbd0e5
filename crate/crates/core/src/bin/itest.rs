fn main() {
    std::process::exit(itest::cli::main(std::env::args_os()));
}

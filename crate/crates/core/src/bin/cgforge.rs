fn main() {
    std::process::exit(cgforge::cli::main_from(std::env::args_os()));
}

fn main() {
    std::process::exit(pseudopost::cli::run(std::env::args_os()));
}

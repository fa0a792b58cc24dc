fn main() {
    std::process::exit(perceptimetric_cli::run(std::env::args_os()));
}

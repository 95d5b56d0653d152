fn main() {
    std::process::exit(ngso_sim::cli::main(std::env::args_os()));
}

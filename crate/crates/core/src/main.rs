fn main() {
    std::process::exit(nrmab::cli::run(std::env::args_os()));
}

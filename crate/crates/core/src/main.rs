fn main() {
    std::process::exit(refractory::cli::run(std::env::args_os()));
}

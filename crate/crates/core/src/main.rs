fn main() {
    std::process::exit(spem::bench::cli::run(std::env::args_os()));
}

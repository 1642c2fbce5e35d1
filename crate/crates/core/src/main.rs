fn main() {
    std::process::exit(geoconvex_core::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(mapsim::cli::run(std::env::args_os()));
}

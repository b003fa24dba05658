fn main() {
    std::process::exit(wpnav::cli::run(std::env::args_os()));
}

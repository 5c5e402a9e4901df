fn main() {
    std::process::exit(mflq::cli::run(std::env::args_os()));
}

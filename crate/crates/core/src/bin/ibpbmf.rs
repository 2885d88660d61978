fn main() {
    std::process::exit(ibpbmf::cli::run(std::env::args_os()));
}

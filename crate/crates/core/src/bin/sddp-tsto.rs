fn main() {
    std::process::exit(sddp_tsto::cli::run(std::env::args_os()));
}

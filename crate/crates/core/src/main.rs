fn main() {
    std::process::exit(uvhand::cli::dispatch(std::env::args_os()));
}

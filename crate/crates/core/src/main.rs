fn main() {
    std::process::exit(torus_hj::cli_io::run_from_args(std::env::args_os()));
}

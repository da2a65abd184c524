fn main() {
    std::process::exit(fpcavity::cli_io::run(std::env::args_os()));
}

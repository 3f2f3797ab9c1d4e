fn main() {
    std::process::exit(nearfield_cli::run(std::env::args_os()));
}

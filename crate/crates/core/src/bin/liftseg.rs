fn main() {
    std::process::exit(liftseg::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(mfgs_cli::app::run(std::env::args_os()));
}

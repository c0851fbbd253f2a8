fn main() {
    sonic_annulus_cli::init_logging();
    std::process::exit(sonic_annulus_cli::run(std::env::args_os()));
}

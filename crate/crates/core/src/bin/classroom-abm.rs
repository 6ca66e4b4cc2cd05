fn main() {
    std::process::exit(classroom_abm::cli::run(std::env::args_os()));
}

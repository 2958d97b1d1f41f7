fn main() {
    std::process::exit(lab_imprecision::cli::run(std::env::args_os()));
}

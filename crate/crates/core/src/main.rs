fn main() {
    std::process::exit(airspread::cli::main_with_args(std::env::args_os()));
}

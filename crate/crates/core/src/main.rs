fn main() {
    std::process::exit(tsfactor::cli::main_exit_code());
}

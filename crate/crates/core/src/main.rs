fn main() {
    std::process::exit(dissipacert::cli::main_entry());
}

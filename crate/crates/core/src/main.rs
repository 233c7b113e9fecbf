fn main() {
    std::process::exit(hardbody::cli::main_entry());
}

fn main() {
    std::process::exit(opkernel::cli::main_entry());
}

fn main() {
    std::process::exit(nkv::cli::main_entry());
}

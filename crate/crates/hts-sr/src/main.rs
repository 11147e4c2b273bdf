fn main() {
    std::process::exit(hts_sr::cli::main());
}

fn main() {
    std::process::exit(tactile_pack::cli());
}

fn main() {
    std::process::exit(twinbeam::cli::run());
}

fn main() {
    std::process::exit(oi_audit::report::cli::main());
}

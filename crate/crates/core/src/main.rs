fn main() {
    if let Err(e) = cbsim_core::cli::run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

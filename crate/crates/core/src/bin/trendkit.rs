fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(trendkit::cli::run_cli(&args));
}

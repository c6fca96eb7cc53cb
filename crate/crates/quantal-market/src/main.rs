fn main() {
    std::process::exit(i32::from(quantal_market::cli::run(std::env::args_os())));
}

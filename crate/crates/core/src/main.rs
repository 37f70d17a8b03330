fn main() {
    std::process::exit(rebalance::cli::run(std::env::args_os()));
}

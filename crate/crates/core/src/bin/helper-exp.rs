fn main() {
    std::process::exit(helper_exp::cli::run(std::env::args()));
}

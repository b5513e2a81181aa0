fn main() {
    std::process::exit(contest_opt::cli::run(std::env::args_os()));
}

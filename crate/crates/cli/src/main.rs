fn main() {
    std::process::exit(quizsmith_cli::run(std::env::args_os()));
}

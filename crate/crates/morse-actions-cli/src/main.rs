fn main() {
    std::process::exit(morse_actions_cli::run(std::env::args_os()));
}

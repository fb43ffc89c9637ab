fn main() {
    let (code, _report) = menten_cli::run_command(std::env::args());
    std::process::exit(code);
}

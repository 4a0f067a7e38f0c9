fn main() {
    std::process::exit(lvpic::runner::cli(std::env::args_os()));
}

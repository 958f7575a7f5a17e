fn main() {
    std::process::exit(wirewatch::main_with(std::env::args_os()));
}

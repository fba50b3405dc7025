fn main() {
    std::process::exit(szego_lab::main_with_args(std::env::args_os()));
}

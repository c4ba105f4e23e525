fn main() {
    std::process::exit(anderson_lab::run(std::env::args_os()));
}

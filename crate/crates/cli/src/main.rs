fn main() {
    std::process::exit(coilpose_cli::app::main(std::env::args_os()));
}

fn main() {
    std::process::exit(spvkit_cli::main_with_args(std::env::args_os()));
}

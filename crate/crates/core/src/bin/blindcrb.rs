fn main() { std::process::exit(blindcrb::cli::main_with_args(std::env::args_os())); }

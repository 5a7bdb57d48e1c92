fn main() { std::process::exit(trvbi_cli::cli_main(std::env::args().collect())) }

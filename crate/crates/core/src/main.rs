fn main() {
    std::process::exit(pgvcl::evalcli::cli::run(std::env::args_os()));
}

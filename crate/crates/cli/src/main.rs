fn main() {
    std::process::exit(llimex_cli::cli_main(std::env::args_os()));
}

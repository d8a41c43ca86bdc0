fn main() {
    std::process::exit(seqrank::cli::run(std::env::args_os()));
}

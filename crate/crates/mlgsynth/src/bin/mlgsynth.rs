fn main() {
    std::process::exit(mlgsynth::cli::run(std::env::args_os()).into());
}

//! Binary entry point; all logic lives in `liesym::cli`.

fn main() {
    std::process::exit(liesym::cli::run(std::env::args_os()));
}

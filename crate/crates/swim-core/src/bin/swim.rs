//! `swim` binary: thin wrapper over the library's CLI entry point.

fn main() {
    std::process::exit(swim_core::cli::run());
}

fn main() {
    std::process::exit(roadtwin_cli::main_entry(std::env::args_os()));
}

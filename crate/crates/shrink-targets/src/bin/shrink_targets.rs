fn main() {
    eprintln!("shrink-targets CLI: not wired up yet");
    std::process::exit(2);
}

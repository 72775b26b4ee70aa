use gcgrl::cli;

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match cli::run(argv) {
        Ok(()) => {}
        Err(e) => {
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            std::process::exit(e.exit_code());
        }
    }
}

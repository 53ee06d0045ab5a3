use clap::Parser;
use geomech_cli::{exit_code, process_all, Args};

fn main() {
    let args = Args::parse();
    let outcomes = process_all(&args);
    for o in &outcomes {
        for line in &o.stdout {
            println!("{line}");
        }
        for line in &o.stderr {
            eprintln!("{line}");
        }
    }
    std::process::exit(exit_code(&outcomes));
}

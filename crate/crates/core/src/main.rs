use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut out = String::new();
    let mut err = String::new();
    let code = motivic::cli::run(&args, &mut out, &mut err);
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let _ = stdout.lock().write_all(out.as_bytes());
    let _ = stderr.lock().write_all(err.as_bytes());
    std::process::exit(code);
}

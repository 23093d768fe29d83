use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let resp = nilmonoid::cli::run(std::env::args_os());
    let _ = writeln!(std::io::stdout().lock(), "{}", resp.render());
    if let Some(err) = resp.body.get("error").and_then(|e| e.as_str()) {
        eprintln!("error: {err}");
    }
    ExitCode::from(resp.code as u8)
}

use std::io::{self, Write};
use std::process::ExitCode;

use omt_cli::config::QUADRATURE_ENV;

fn main() -> ExitCode {
    let env = std::env::var(QUADRATURE_ENV).ok();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let code = omt_cli::run(std::env::args_os(), env.as_deref(), &mut out, &mut io::stderr());
    let _ = out.flush();
    ExitCode::from(code as u8)
}

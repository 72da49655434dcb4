use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let seed = std::env::var("QKDNET_SEED").ok();
    let code = qkdnet::cli::main_with_args(
        std::env::args_os(),
        seed.as_deref(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}

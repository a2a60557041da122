use std::collections::BTreeMap;
use std::io;

fn main() {
    let env: BTreeMap<String, String> = std::env::vars().collect();
    let code = tracekit_cli::run(std::env::args_os(), &env, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}

//! Prints a built-in task definition as TOML, ready to copy and edit.
//!
//! Usage: `cargo run --example show_task -- [page|baseline|layout|layout-large|ornament|photo]`

use docseg::pipelines::builtin_task;

fn main() -> docseg::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "page".into());
    print!("{}", builtin_task(&name)?.to_toml()?);
    Ok(())
}

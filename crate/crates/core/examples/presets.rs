//! Lists the built-in experiment presets and shows one expanded config.

use nlslab::presets;

fn main() -> nlslab::Result<()> {
    for (id, what) in presets::CATALOG {
        println!("{id:<16}{what}");
    }
    let cfg = presets::preset("fig9")?;
    println!("\n{}", cfg.to_json());
    Ok(())
}

//! Parse the right-hand sides of a system, print them back and evaluate them.

use std::collections::HashMap;

use canard::expr::parse;

fn main() -> anyhow::Result<()> {
    let f = parse("-a*y + z/a", &["a"])?;
    let g = parse("x + 1", &["a"])?;
    println!("f = {f}");
    println!("g = {g}");

    let bindings: HashMap<String, f64> = [("a", 3.0), ("x", 0.0), ("y", 1.0), ("z", 0.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    println!("f(0, 1, 0; a = 3) = {}", f.evaluate(&bindings)?);
    println!("g(0, 1, 0; a = 3) = {}", g.evaluate(&bindings)?);

    // Positional evaluation skips the name lookup.
    println!("f(-1, 0.5, 2; a = 3) = {}", f.eval([-1.0, 0.5, 2.0], &[3.0])?);

    println!("2^3^2 = {}", parse::<&str>("2^3^2", &[])?.eval([0.0; 3], &[])?);
    match parse::<&str>("x + * y", &[]) {
        Ok(_) => unreachable!(),
        Err(e) => println!("\"x + * y\" fails at byte {}: {e}", e.offset()),
    }
    Ok(())
}

//! Winding numbers of planar fields along the unit circle.

use std::f64::consts::TAU;

use canard::degree::{winding, WindingOptions};

fn circle(s: f64) -> (f64, f64) {
    (s.cos(), s.sin())
}

fn main() -> anyhow::Result<()> {
    let opts = WindingOptions::default();
    let fields: [(&str, fn(f64) -> Result<[f64; 2], String>); 4] = [
        ("(u, 5v)", |s| {
            let (u, v) = circle(s);
            Ok([u, 5.0 * v])
        }),
        ("(-u, 5v)", |s| {
            let (u, v) = circle(s);
            Ok([-u, 5.0 * v])
        }),
        ("(1, 2)", |_| Ok([1.0, 2.0])),
        ("z^2", |s| {
            let (u, v) = circle(s);
            Ok([u * u - v * v, 2.0 * u * v])
        }),
    ];
    for (name, field) in fields {
        let w = winding(field, TAU, &opts)?;
        println!(
            "{name:>9}: winding {:+}, certified {}, {} evaluations, max increment {:.3}",
            w.winding, w.certified, w.n_evals, w.max_increment
        );
    }
    // Reversing the loop negates the result.
    let w = winding(|s| Ok([(-s).cos(), 5.0 * (-s).sin()]), TAU, &opts)?;
    println!("(u, 5v) traversed clockwise: {:+}", w.winding);
    Ok(())
}

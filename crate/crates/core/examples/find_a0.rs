//! Bisection for the smallest `a` at which the canonical curves cross.

use canard::reduced::GeometryOptions;
use canard::solver::find_a0;
use canard::system::SystemSpec;

fn main() -> anyhow::Result<()> {
    let family = |a: f64| Ok(SystemSpec::example_family(a));
    let r = find_a0(family, (1.5, 2.5), 1e-4, &GeometryOptions::default())?;
    println!("a0 = {:.5} (bracket [{:.6}, {:.6}], {} bisections)", r.a0, r.bracket[0], r.bracket[1], r.iterations);
    Ok(())
}

//! Canard period as epsilon shrinks.

use canard::canardmap::MapParams;
use canard::reduced::{compute_geometry, default_alpha, GeometryOptions};
use canard::solver::{period_sweep, SolverOptions};
use canard::system::SystemSpec;

fn main() -> anyhow::Result<()> {
    let sys = SystemSpec::example_family(3.0);
    let geom = compute_geometry(&sys, &GeometryOptions::default())?;
    let alpha = default_alpha(&sys, &geom, 8);
    let base = MapParams::new(0.1, alpha, 0.99 * alpha / 4.0);
    println!("limit sigma - tau = {:.6}", geom.sigma - geom.tau);
    let rows = period_sweep(&sys, &geom, &base, &[0.2, 0.1, 0.05], &SolverOptions::default());
    for r in rows {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "eps {:<5} orbit period {} defect {} fixed point of W: {}",
            r.eps,
            fmt(r.orbit_period),
            fmt(r.orbit_defect),
            r.case_tag.map_or("no".to_string(), |c| c.label().to_string())
        );
    }
    Ok(())
}

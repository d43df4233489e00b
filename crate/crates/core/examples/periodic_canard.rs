//! Search for the periodic canard and report how the orbit found exits.

use canard::canardmap::{CanardMap, MapParams};
use canard::reduced::{compute_geometry, default_alpha, GeometryOptions};
use canard::solver::{find_fixed_point, SolverError, SolverOptions};
use canard::system::SystemSpec;

fn main() -> anyhow::Result<()> {
    let eps: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.1);
    let sys = SystemSpec::example_family(3.0);
    let geom = compute_geometry(&sys, &GeometryOptions::default())?;
    let alpha = default_alpha(&sys, &geom, 8);
    let map = CanardMap::new(&sys, &geom, MapParams::new(eps, alpha, 0.99 * alpha / 4.0))?;
    println!("eps = {eps}, alpha = {alpha:.6}, sigma - tau = {:.6}", geom.sigma - geom.tau);
    match find_fixed_point(&map, &SolverOptions::default()) {
        Ok(r) => {
            println!("fixed point {:?} ({:?}), period {:.6}", r.fixed_point, r.case_tag, r.period);
            println!("closure {:.2e}, adherence ok: {}", r.closure_error, r.adherence.ok);
        }
        Err(SolverError::NoConvergence { message, orbit }) => {
            println!("no fixed point: {message}");
            if let Some(o) = orbit {
                println!("periodic orbit through {:?}: period {:.6}, closure {:.2e}", o.p, o.period, o.closure_error);
            }
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

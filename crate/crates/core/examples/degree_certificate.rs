//! Degree of `id - W` on the chart square, computed on both routes.

use canard::canardmap::{CanardMap, MapParams};
use canard::degree::{degree_w, DegreeRoute, WindingOptions};
use canard::reduced::{compute_geometry, default_alpha, GeometryOptions};
use canard::system::SystemSpec;

fn main() -> anyhow::Result<()> {
    let sys = SystemSpec::example_family(3.0);
    let geom = compute_geometry(&sys, &GeometryOptions::default())?;
    let alpha = default_alpha(&sys, &geom, 8);
    let map = CanardMap::new(&sys, &geom, MapParams::new(0.05, alpha, 0.99 * alpha / 4.0))?;
    let opts = WindingOptions {
        allow_uncertified: true,
        ..WindingOptions::default()
    };
    println!("sgn A = {}", geom.sign_a());
    for route in [DegreeRoute::ChartDifference, DegreeRoute::StatePlane] {
        match degree_w(&map, route, 16, &opts) {
            Ok(r) => println!(
                "{route:?}: degree {}, certified {}, {} evaluations, min |F| = {:.3e}",
                r.degree, r.certified, r.n_evals, r.min_field_magnitude
            ),
            Err(e) => println!("{route:?}: {e}"),
        }
    }
    Ok(())
}

//! Canonical curves of the two reduced flows and their transversal crossing.

use canard::reduced::{compute_geometry, default_alpha, GeometryOptions};
use canard::system::SystemSpec;

fn main() -> anyhow::Result<()> {
    for a in [3.0, 2.0, 1.5] {
        let sys = SystemSpec::example_family(a);
        match compute_geometry(&sys, &GeometryOptions::default()) {
            Ok(geom) => {
                println!(
                    "a = {a}: tau = {:.10}, sigma = {:.10}, crossing = ({:.10}, {:.10}), A = {:.6}",
                    geom.tau, geom.sigma, geom.x_star, geom.y_star, geom.a
                );
                println!(
                    "        T_a = {}, T_r = {}, default alpha = {:.6}",
                    geom.t_a,
                    geom.t_r,
                    default_alpha(&sys, &geom, 8)
                );
            }
            Err(e) => println!("a = {a}: {e}"),
        }
    }
    Ok(())
}

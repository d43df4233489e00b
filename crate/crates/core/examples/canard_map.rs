//! The return map on the chart square: exit times and cases on the sides
//! of the square, and the reduced-flow classification of a few points.

use canard::canardmap::{CanardMap, MapParams};
use canard::reduced::{classify, compute_geometry, default_alpha, ChartPoint, GeometryOptions, Parallelogram};
use canard::system::SystemSpec;

fn main() -> anyhow::Result<()> {
    let sys = SystemSpec::example_family(3.0);
    let geom = compute_geometry(&sys, &GeometryOptions::default())?;
    let alpha = default_alpha(&sys, &geom, 8);
    let params = MapParams::new(0.05, alpha, 0.99 * alpha / 4.0);
    let map = CanardMap::new(&sys, &geom, params)?;
    let par = Parallelogram::new(alpha, geom.sign_a());
    println!("alpha = {alpha:.6}, sigma = {:.6}", geom.sigma);

    for (name, side) in [("Q-", par.q_minus(3)), ("Q+", par.q_plus(3))] {
        for uv in side {
            let p = map.chart.chart_inverse(uv, map.chart.linear_inverse(uv.as_array()))?;
            let w = map.map_w(p)?;
            println!(
                "{name} (u, v) = ({:+.4}, {:+.4}): s = {:+.5}, {}, image = ({:.5}, {:.5})",
                uv.u,
                uv.v,
                w.s_eps,
                w.case_tag.label(),
                w.image[0],
                w.image[1]
            );
        }
    }

    for v in [-0.05, 0.05] {
        let uv = ChartPoint::new(0.0, v);
        let p = map.chart.chart_inverse(uv, map.chart.linear_inverse(uv.as_array()))?;
        let (class, crossing) = classify(&map.chart, p)?;
        println!("v = {v:+}: {class:?}, reduced flow crosses {:?} at t = {:.5}", crossing.axis, crossing.t);
    }
    Ok(())
}

//! Check the standing assumptions on f and g over a box and read off `M`.

use canard::system::{check_assumptions, Bounds3, SystemSpec};

fn main() -> anyhow::Result<()> {
    let sys = SystemSpec::example_family(3.0);
    let report = check_assumptions(&sys, &Bounds3::cube(-3.0, 1.0), 21, 7);
    println!("f(0) = {}, g(0) = {}", report.f_origin, report.g_origin);
    println!("sign condition: {}", report.sign_condition_ok);
    println!("M_est = {:.6}, Lipschitz estimate = {:.6}", report.m_est, report.lambda_est);
    println!("pass = {}", report.pass);

    // g(0) = 0 violates the assumptions.
    let params = [("a".to_string(), 3.0)].into_iter().collect();
    let bad = SystemSpec::new("-a*y + z/a", "x", &params)?;
    let report = check_assumptions(&bad, &Bounds3::cube(-3.0, 1.0), 11, 7);
    println!("with g = x: g(0) = {}, pass = {}", report.g_origin, report.pass);
    Ok(())
}

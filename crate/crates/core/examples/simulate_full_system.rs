//! Integrate the full three-dimensional system across the switching plane
//! `z = 0` and log the crossings.

use canard::integrate::{integrate_full, Direction, EventSpec, FullOptions, Options};
use canard::system::SystemSpec;

fn main() -> anyhow::Result<()> {
    let sys = SystemSpec::example_family(3.0);
    let eps = 0.05;
    let opts = FullOptions {
        base: Options::with_tol(1e-10),
        m_est: 10.0,
        ..FullOptions::default()
    };
    let events = [EventSpec::new("z=0", Direction::Any, false, |_, s: &[f64; 3]| s[2])];
    let traj = integrate_full(&sys, eps, [-1.7, 0.0, 0.5], 0.0, 4.0, &events, &opts)?;
    println!("status {:?}, {} steps, {} rejected", traj.status, traj.times.len() - 1, traj.rejected);
    for e in &traj.events {
        println!("  z = 0 at t = {:.6}: x = {:.6}, y = {:.6}", e.t, e.state[0], e.state[1]);
    }
    let end = traj.last();
    println!("final state at t = {:.3}: {:?}", traj.t_end(), end);
    // Dense output between steps.
    println!("state at t = 0.123: {:?}", traj.eval(0.123));
    Ok(())
}

//! Free-space run: with no scatterer the solver must reproduce the incident wave.
//! A dielectric cylinder then shows how far the total field departs from it.
//!
//! ```text
//! cargo run --release --example plane_wave
//! ```

use podgpr::error::Result;
use podgpr::fom::{incident_mismatch, Component, FdtdSolver, FullOrderSolver, GeometrySpec, SolverConfig};

fn main() -> Result<()> {
    let config = SolverConfig {
        domain_half_width: 2.0,
        grid_points_per_wavelength: 20,
        cfl_factor: 0.9,
        frequency: 1.0,
        num_periods: 10,
        // permittivity 1 inside the "cylinder" makes the domain homogeneous
        geometry: GeometrySpec::cylinder(0.6, 1.0),
        mu_r: 1.0,
        steps_per_period: None,
    };
    let solver = FdtdSolver::new(config.clone())?;
    println!(
        "{} x {} nodes, dt = {:.4}, {} steps",
        solver.grid().n,
        solver.grid().n,
        solver.dt(),
        solver.total_steps()
    );

    let times = config.last_period_times(4);
    for eps in [1.0, 3.0] {
        println!("eps_r = {eps}");
        for state in solver.run(&[eps], &times)? {
            let ez = incident_mismatch(&solver, &state, Component::Ez, 0.3);
            let hy = incident_mismatch(&solver, &state, Component::Hy, 0.3);
            let hx_peak = state.hx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            println!(
                "  t = {:7.3}: Ez mismatch {ez:.2e}, Hy mismatch {hy:.2e}, max |Hx| {hx_peak:.1e}",
                state.time
            );
        }
    }
    Ok(())
}

//! Two-step POD of cylinder snapshots compared with a direct POD of all snapshots.
//!
//! ```text
//! cargo run --release --example pod_compression
//! ```

use nalgebra::DMatrix;
use podgpr::dataset::assemble_snapshots;
use podgpr::error::Result;
use podgpr::fom::{FdtdSolver, GeometrySpec, SolverConfig};
use podgpr::pod::{pod_truncate, projection_residual_norm_sum, two_step_pod};

fn main() -> Result<()> {
    let n_l = 16;
    let mut config = SolverConfig {
        domain_half_width: 1.6,
        grid_points_per_wavelength: 16,
        cfl_factor: 0.9,
        frequency: 1.0,
        num_periods: 8,
        geometry: GeometrySpec::cylinder(0.5, 2.0),
        mu_r: 1.0,
        steps_per_period: None,
    };
    config.steps_per_period = Some(FdtdSolver::steps_per_period_for(&config, n_l));
    let solver = FdtdSolver::new(config.clone())?;
    let thetas: Vec<Vec<f64>> = (0..7).map(|j| vec![1.0 + 0.5 * j as f64]).collect();
    let [ez, _, _] = assemble_snapshots(&solver, &thetas, &config.last_period_times(n_l))?;

    println!("{} snapshots of {} dofs", ez.matrices.len() * n_l, ez.dofs());
    println!(" eps_t     eps_theta  first-step dims        d   residual sum   bound       direct d  direct residual");
    let all = DMatrix::from_fn(ez.dofs(), thetas.len() * n_l, |i, j| ez.matrices[j / n_l][(i, j % n_l)]);
    for (eps_t, eps_theta) in [(1e-2, 1e-3), (1e-3, 1e-4), (1e-5, 1e-6)] {
        let basis = two_step_pod(&ez.matrices, eps_t, eps_theta)?;
        let residual = projection_residual_norm_sum(&basis.basis, &all);
        let direct = pod_truncate(&all, eps_theta)?;
        println!(
            "{eps_t:7.0e}  {eps_theta:7.0e}   {:<20}  {:3}   {residual:.3e}     {:.3e}   {:3}       {:.3e}",
            format!("{:?}", basis.first_step_dims),
            basis.dim(),
            basis.projection_bound(),
            direct.dim,
            projection_residual_norm_sum(&direct.basis, &all)
        );
    }

    Ok(())
}

//! Frequency-domain view of one period: amplitude of Ez along the x axis from
//! the full-order solver and from the reduced model.
//!
//! ```text
//! cargo run --release --example fourier_view
//! ```

use podgpr::cli::{Preset, RunConfig};
use podgpr::error::Result;
use podgpr::fom::{run_full_order, Component, FdtdSolver};
use podgpr::rom::{fourier_extract, offline_build};

fn main() -> Result<()> {
    let resolved = RunConfig::preset(Preset::Cylinder, 0.25)?.resolve()?;
    let model = offline_build(&resolved.solver, &resolved.grid, &resolved.options)?;
    let times = &model.grid.snapshot_times;
    let eps = 3.3;

    let full = run_full_order(&model.config, &[eps], times)?;
    let reduced = model.online_trajectory(times, &[eps])?.states();
    let f = model.config.frequency;
    let a = fourier_extract(&full, Component::Ez, f)?;
    let b = fourier_extract(&reduced, Component::Ez, f)?;

    let grid = FdtdSolver::new(model.config.clone())?.grid().clone();
    println!("     x   |Ez| full  |Ez| ROM   phase full  phase ROM");
    for k in grid.row(0.0).into_iter().step_by(6) {
        let x = grid.coord(k % grid.n);
        println!(
            "{x:6.2}   {:8.4}  {:8.4}   {:9.3}  {:9.3}",
            a[k].norm(),
            b[k].norm(),
            a[k].arg(),
            b[k].arg()
        );
    }
    Ok(())
}

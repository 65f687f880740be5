//! Offline build and online queries for a dielectric cylinder with permittivity in [1, 5].
//!
//! Uses the built-in cylinder preset at reduced resolution, saves the model,
//! reloads it and compares reduced fields with full-order solves.
//!
//! ```text
//! cargo run --release --example cylinder_rom [scale]
//! ```

use std::time::Instant;

use podgpr::cli::{Preset, RunConfig};
use podgpr::error::Result;
use podgpr::fom::{run_full_order, Component};
use podgpr::rom::{offline_build, RomModel};

fn main() -> Result<()> {
    let scale = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.25);
    let resolved = RunConfig::preset(Preset::Cylinder, scale)?.resolve()?;
    println!(
        "scale {scale}: {} training permittivities, {} snapshots per period, {} points per wavelength",
        resolved.grid.parameter_points.len(),
        resolved.grid.snapshot_times.len(),
        resolved.solver.grid_points_per_wavelength
    );

    let model = offline_build(&resolved.solver, &resolved.grid, &resolved.options)?;
    let t = &model.timings;
    println!(
        "offline: snapshots {:.1} s, POD {:.1} s, GP training {:.1} s; d = {:?}",
        t.snapshots,
        t.pod,
        t.gpr,
        model.dims()
    );

    let dir = tempfile_dir();
    model.save(&dir)?;
    let model = RomModel::load(&dir)?;

    let times = &model.grid.snapshot_times;
    for eps in [1.5, 2.75, 4.25, 5.5] {
        let start = Instant::now();
        let online = model.online_trajectory(times, &[eps])?;
        let online_secs = start.elapsed().as_secs_f64();
        let reference = run_full_order(&model.config, &[eps], times)?;
        let report = model.error_report(&[eps], &reference)?;
        print!("eps_r = {eps}: online {:.1} ms", 1e3 * online_secs);
        if online.extrapolated {
            print!(" (extrapolated)");
        }
        println!();
        for c in Component::ALL {
            if let Some((rom, proj)) = report.time_averaged(c, &[eps]) {
                println!("  {c}: POD-GPR error {rom:.3e}, projection error {proj:.3e}");
            }
        }
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    std::env::temp_dir().join(format!("podgpr-cylinder-{}", std::process::id()))
}

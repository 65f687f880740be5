//! Four-layer dielectric cylinder: one permittivity per layer, so the parameter
//! GPs see a 4-D input with one lengthscale per layer.
//!
//! Runs through the same entry points as the command-line tool and writes its
//! workspace under the system temp directory.
//!
//! ```text
//! cargo run --release --example multilayer_rom [scale]
//! ```

use podgpr::cli::{cmd_build, cmd_evaluate, Preset, RunConfig};
use podgpr::error::Result;
use podgpr::fom::Component;
use podgpr::rom::RomModel;

fn main() -> Result<()> {
    let scale = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.125);
    let mut config = RunConfig::preset(Preset::Multilayer, scale)?;
    let workspace = std::env::temp_dir().join(format!("podgpr-multilayer-{}", std::process::id()));
    config.paths.workspace = workspace.clone();
    println!("training grid {:?} over {:?}", config.sampling.counts, config.sampling.ranges);

    let summary = cmd_build(&config, false, &workspace)?;
    println!("{summary}");

    let model = RomModel::load(&summary.model_dir)?;
    for c in Component::ALL {
        let gp = &model.component(c).surrogates[0].param_gps()[0];
        println!("{c} first coefficient, first mode: lengthscales {:.3?}", gp.hyper().lengthscales);
    }

    let out = workspace.join("evaluation");
    for record in cmd_evaluate(&model, None, &config.evaluation.thetas, true, &out)? {
        println!("theta = {:?}", record.theta);
        for (c, e) in Component::ALL.iter().zip(record.errors.unwrap_or_default()) {
            if let Some((rom, proj)) = e {
                println!("  {c}: POD-GPR error {rom:.3e}, projection error {proj:.3e}");
            }
        }
    }
    std::fs::remove_dir_all(&workspace).ok();
    Ok(())
}

//! Fit an ARD squared-exponential GP to a noiseless 1-D function and query it.
//!
//! ```text
//! cargo run --release --example gpr_fit
//! ```

use nalgebra::{DMatrix, DVector};
use podgpr::error::Result;
use podgpr::gpr::{GprModel, GprOptions};

fn target(x: f64) -> f64 {
    (3.0 * x).sin() + 0.5 * x
}

fn main() -> Result<()> {
    let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.5).collect();
    let inputs = DMatrix::from_column_slice(xs.len(), 1, &xs);
    let targets = DVector::from_iterator(xs.len(), xs.iter().map(|&x| target(x)));
    let gp = GprModel::train(inputs, targets, &GprOptions::default())?;

    let h = gp.hyper();
    println!(
        "mean {:.3}, lengthscale {:.3}, signal std {:.3}, noise std {:.2e}, log likelihood {:.2}",
        h.mean_const,
        h.lengthscales[0],
        h.signal_std,
        h.noise_std,
        gp.log_likelihood()
    );
    println!("    x     truth      mean    2 std");
    for i in 0..=16 {
        let x = i as f64 * 0.25;
        let p = gp.predict(&[x])?;
        println!("{x:5.2}  {:8.4}  {:8.4}  {:7.4}", target(x), p.mean, 2.0 * p.variance.sqrt());
    }
    Ok(())
}

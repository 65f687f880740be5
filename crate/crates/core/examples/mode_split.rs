//! Separate a coefficient table `alpha(t, theta)` into time and parameter modes,
//! fit one GP per mode and recover values between the samples.
//!
//! ```text
//! cargo run --release --example mode_split
//! ```

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use podgpr::error::Result;
use podgpr::fom::Component;
use podgpr::gpr::GprOptions;
use podgpr::modes::{decompose, evaluate_coefficient, train_mode_surrogate};

// a steady oscillation whose amplitude and phase drift with the parameter
fn alpha(t: f64, theta: f64) -> f64 {
    theta.sqrt() * (TAU * t).cos() + (0.7 * theta).sin() * (TAU * t).sin()
}

fn main() -> Result<()> {
    let times: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
    let params: Vec<Vec<f64>> = (0..7).map(|j| vec![1.0 + 0.5 * j as f64]).collect();
    let p = DMatrix::from_fn(times.len(), params.len(), |i, j| alpha(times[i], params[j][0]));

    let dec = decompose(&p, 1e-8)?;
    let sv: Vec<String> = dec.singular_values.iter().map(|s| format!("{s:.3e}")).collect();
    println!("singular values [{}], kept q = {}", sv.join(", "), dec.q);
    let surrogate = train_mode_surrogate(&dec, &times, &params, Component::Ez, 0, &GprOptions::default())?;

    println!("     t   theta     exact  recovered");
    for (t, theta) in [(0.03, 1.25), (0.41, 2.1), (0.72, 3.9), (0.5, 4.5)] {
        let est = evaluate_coefficient(&surrogate, t, &[theta])?;
        let flag = if est.extrapolated { "  (extrapolated)" } else { "" };
        println!("{t:6.2} {theta:6.2}  {:8.4}  {:8.4}{flag}", alpha(t, theta), est.value);
    }
    Ok(())
}

//! Runs the matching protocol on the builtin models under several
//! perturbations and prints recall at a few thresholds.
//!
//! cargo run --release --example protocol

use std::time::Instant;

use hgnd::bench::{run_protocol, BenchmarkConfig, Timings};
use hgnd::shapes::benchmark_models;

fn main() {
    let models = benchmark_models();
    let mut config = BenchmarkConfig::builtin_scene();

    for (noise, density) in [(0.0, 1.0), (0.1, 1.0), (0.2, 1.0), (0.3, 1.0), (0.3, 0.5)] {
        config.noise_sigma_mr = noise;
        config.density_factor = density;
        let start = Instant::now();
        let out = run_protocol(&models, &config, &mut Timings::default()).expect("protocol run");
        let r = |e: f64| out.curve.at(e).unwrap().recall;
        println!(
            "noise {noise:.1}mr density {density:<4} gt {:4} recall@0.5 {:.3} @0.8 {:.3} @1.0 {:.3} peak {:.3} 1-p@0.8 {:.3} ({:.1}s)",
            out.ground_truth.len(),
            r(0.5),
            r(0.8),
            r(1.0),
            out.curve.peak_recall(),
            out.curve.at(0.8).unwrap().one_minus_precision,
            start.elapsed().as_secs_f64(),
        );
    }
}

//! Prints FRR over the calibration grid and the largest sigma whose 95%
//! Wilson upper bound stays at or below 1%.

use bbcreds_core::config::{ProtocolConfig, CALIBRATION_GRID};
use bbcreds_core::eval::calibrate_sigma;

fn main() {
    let cfg = ProtocolConfig::default();
    let seed = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(2025);
    match calibrate_sigma(&cfg, &CALIBRATION_GRID, 1000, seed, 0.01).expect("calibration run") {
        Some((sigma, reports)) => {
            for r in &reports {
                let frr = r.frr.expect("frr report");
                println!(
                    "sigma={} failures={} frr={:.4} wilson_hi={:.4}",
                    r.sigma, frr.events, frr.rate, frr.wilson_high
                );
            }
            println!("calibrated sigma_default={sigma}");
        }
        None => println!("no grid point meets the target"),
    }
}

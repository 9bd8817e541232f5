//! Correlation spectra of the benchmark states with a little white noise.
//!
//! ```text
//! cargo run --release -p irrcorr --example benchmarks
//! ```

use irrcorr::spectrum::{correlation_levels, SpectrumSettings};
use irrcorr::states;

fn main() -> irrcorr::Result<()> {
    let p0 = 1e-3;
    let settings = SpectrumSettings::default();
    let cases = [
        ("GHZ4", states::ghz(4)?),
        ("Smolin", states::smolin()?),
        ("W5", states::w(5)?),
    ];
    for (name, pure) in cases {
        let rho = states::depolarize(&pure, p0)?;
        let (record, _) = correlation_levels(&rho, None, &settings)?;
        let orders: Vec<String> = (2..=record.n)
            .map(|m| format!("C_{m}={:.4}", record.order(m).unwrap_or(f64::NAN)))
            .collect();
        println!(
            "{name:>6} @ p0={p0}: S={:.4} C_T={:.4} {} [{}]",
            record.entropy_bits,
            record.total_bits,
            orders.join(" "),
            record.flag_string()
        );
    }
    Ok(())
}

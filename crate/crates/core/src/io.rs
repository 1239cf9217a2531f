//! Deterministic CSV/JSON emission.
//!
//! Floats are printed with 17 significant digits so every emitted value
//! round-trips to the exact same f64 when re-parsed, which is what makes
//! byte-identical reruns a meaningful contract.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use crate::allocation::AllocationResult;
use crate::error::{Error, Result};
use crate::rates::RateReport;
use crate::CMat;

/// Format a float with 17 significant digits (f64 round-trip safe).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

/// Complex matrix as nested `[re, im]` pairs.
pub fn cmat_to_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect();
    json!(rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// One CSV row per link: tier, index, distance, signal, interference, noise, SE.
pub fn rates_csv(report: &RateReport) -> String {
    let mut s = String::from("tier,link_index,distance_m,signal_w,interference_w,noise_w,se_bps_hz\n");
    for link in &report.links {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            link.tier,
            link.link_index,
            fmt_f64(link.distance_m),
            fmt_f64(link.signal_w),
            fmt_f64(link.interference_w),
            fmt_f64(link.noise_w),
            fmt_f64(link.se_bps_hz),
        );
    }
    s
}

pub fn allocations_csv(results: &[AllocationResult]) -> String {
    let mut s = String::from("method,mu_a,total_rate_bps,backhaul_slack,iterations,converged\n");
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.method,
            fmt_f64(r.mu_a),
            fmt_f64(r.total_rate_bps),
            fmt_f64(r.backhaul_slack_bps),
            r.iterations,
            r.converged,
        );
    }
    s
}

/// Two-column trace (iteration index, value).
pub fn trace_csv(value_name: &str, values: &[f64]) -> String {
    let mut s = format!("iteration,{value_name}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i, fmt_f64(*v));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 2.5e-20, -7.23e11, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }
}

//! Measurement savings of rays over a full 2D scan.

use serde::{Deserialize, Serialize};

use rbc_core::{RbcError, Result};

/// Pixels of the 30×30 scan that rays replace.
pub const BASELINE_PX: usize = 900;

/// Percentage of `baseline_px` saved by `m` rays of `l_px` pixels, rounded.
pub fn data_reduction(m: usize, l_px: usize, baseline_px: usize) -> Result<i64> {
    if m == 0 || l_px == 0 || baseline_px == 0 {
        return Err(RbcError::Config("ray count, length and baseline must be positive".into()));
    }
    Ok((100.0 * (1.0 - (m * l_px) as f64 / baseline_px as f64)).round() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub m: usize,
    pub l_px: usize,
    pub pixels: usize,
    pub baseline_px: usize,
    pub delta: i64,
}

/// One row per `(m, l_px)`, ordered by length then ray count.
pub fn reduction_report(ms: &[usize], lengths: &[usize], baseline_px: usize) -> Result<Vec<ReductionRow>> {
    let mut rows = Vec::with_capacity(ms.len() * lengths.len());
    for &l_px in lengths {
        for &m in ms {
            let delta = data_reduction(m, l_px, baseline_px)?;
            if delta >= 100 {
                return Err(RbcError::Contract(format!("{m}×{l_px} px rounds to a {delta}% reduction")));
            }
            rows.push(ReductionRow { m, l_px, pixels: m * l_px, baseline_px, delta });
        }
    }
    Ok(rows)
}

pub fn reduction_csv(rows: &[ReductionRow]) -> String {
    let mut out = String::from("m,l_px,pixels,baseline_px,delta\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.m, r.l_px, r.pixels, r.baseline_px, r.delta));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_cases() {
        assert_eq!(data_reduction(30, 30, 900).unwrap(), 0);
        assert_eq!(data_reduction(6, 60, 900).unwrap(), 60);
        assert!(data_reduction(0, 60, 900).is_err());
        // more pixels than the scan: negative saving, still reported
        assert_eq!(data_reduction(12, 80, 900).unwrap(), -7);
    }

    #[test]
    fn report_rows() {
        let rows = reduction_report(&[5, 12], &[24, 44], BASELINE_PX).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0], ReductionRow { m: 5, l_px: 24, pixels: 120, baseline_px: 900, delta: 87 });
        assert!(reduction_csv(&rows).lines().count() == 5);
    }
}

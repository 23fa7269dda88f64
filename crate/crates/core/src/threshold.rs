//! Critical noise levels at which the Fano bound of the nested game drops to `log₂ d`.

use rayon::prelude::*;

use crate::boxes::check_alphabet;
use crate::error::{domain, Result};
use crate::info::isotropic_fano_bound;
use crate::report::fmt_sig6;
use crate::scalar::Real;

/// Default tree depth scanned when optimizing over `n`.
pub const DEFAULT_MAX_DEPTH: u32 = 40;
/// Largest depth accepted by [`critical_e`]; `2ⁿ` and `Eⁿ` stay finite and normal below it.
pub const MAX_THRESHOLD_DEPTH: u32 = 512;
pub const MAX_BISECTION_STEPS: usize = 60;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRecord<T> {
    pub d: usize,
    pub depth: u32,
    pub e_critical: T,
}

/// Thresholds for `n = 1..=n_max` and their minimum (ties go to the smaller `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve<T> {
    pub d: usize,
    pub records: Vec<ThresholdRecord<T>>,
    pub e_optimal: T,
    pub n_at_optimum: u32,
}

/// `2ⁿ · fano(((d−1)Eⁿ + 1)/d) − log₂ d`; positive means the game violates the bound.
pub fn violation_margin<T: Real>(d: usize, depth: u32, e: T) -> T {
    isotropic_fano_bound(d, depth, e) - T::from_count(d).log2()
}

/// Bisects `E ∈ [0, 1]` for the zero of [`violation_margin`] until the bracket is below `tol`.
pub fn critical_e<T: Real>(d: usize, depth: u32, tol: T) -> Result<T> {
    check_alphabet(d)?;
    if !(tol > T::zero()) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    if depth == 0 || depth > MAX_THRESHOLD_DEPTH {
        return Err(domain(format!(
            "depth must lie in 1..={MAX_THRESHOLD_DEPTH}, got {depth}"
        )));
    }
    let mut lo = T::zero();
    let mut hi = T::one();
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        if violation_margin(d, depth, mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

/// Threshold curve for one alphabet size; depths are evaluated in parallel.
pub fn curve<T: Real>(d: usize, n_max: u32, tol: T) -> Result<ThresholdCurve<T>> {
    if n_max == 0 {
        return Err(domain("n_max must be at least 1"));
    }
    let records = (1..=n_max)
        .into_par_iter()
        .map(|depth| {
            Ok(ThresholdRecord {
                d,
                depth,
                e_critical: critical_e(d, depth, tol)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = records.iter().fold(&records[0], |best, r| {
        if r.e_critical < best.e_critical {
            r
        } else {
            best
        }
    });
    Ok(ThresholdCurve {
        d,
        e_optimal: best.e_critical,
        n_at_optimum: best.depth,
        records,
    })
}

/// One row of the optimized-over-`n` threshold table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow<T> {
    pub d: usize,
    pub e_ic: T,
    pub n_at_optimum: u32,
}

impl<T: Real> TableRow<T> {
    /// `e_ic` rounded to three decimals.
    pub fn rounded(&self) -> T {
        (self.e_ic * T::lit(1000.0)).round() / T::lit(1000.0)
    }
}

pub fn table_one<T: Real>(d_list: &[usize], n_max: u32, tol: T) -> Result<Vec<TableRow<T>>> {
    d_list
        .iter()
        .map(|&d| {
            let c = curve(d, n_max, tol)?;
            Ok(TableRow {
                d,
                e_ic: c.e_optimal,
                n_at_optimum: c.n_at_optimum,
            })
        })
        .collect()
}

/// CSV with header `d,n,e_critical`.
pub fn curves_csv<T: Real>(curves: &[ThresholdCurve<T>]) -> String {
    let mut out = String::from("d,n,e_critical\n");
    for c in curves {
        for r in &c.records {
            out.push_str(&format!(
                "{},{},{}\n",
                r.d,
                r.depth,
                fmt_sig6(r.e_critical.to_f64_lossy())
            ));
        }
    }
    out
}

/// CSV with header `d,e_ic,n_at_opt`.
pub fn table_csv<T: Real>(rows: &[TableRow<T>]) -> String {
    let mut out = String::from("d,e_ic,n_at_opt\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.d,
            fmt_sig6(r.e_ic.to_f64_lossy()),
            r.n_at_optimum
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    // Frozen from an 80-digit mpmath bisection of the textbook Fano expression.
    const ORACLE: &[(usize, u32, f64)] = &[
        (2, 1, 0.779944271123281),
        (2, 30, 0.71096669983517),
        (2, 40, 0.70999974931078),
        (2, 120, 0.708069791772584),
        (2, 200, 0.707684430254915),
        (3, 1, 0.760807742737758),
        (3, 40, 0.707938546156403),
        (4, 10, 0.705008315780579),
        (5, 7, 0.699830874716494),
        (10, 5, 0.679647195103),
    ];

    #[test]
    fn matches_high_precision_oracle() {
        for &(d, n, expected) in ORACLE {
            let got = critical_e(d, n, 1e-9).unwrap();
            assert!(
                (got - expected).abs() < 2e-9,
                "d={d} n={n}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn bracket_and_root_certification() {
        for d in [2, 3, 5, 10] {
            for n in [1, 2, 5, 17, 40] {
                assert!(violation_margin(d, n, 1.0f64) > 0.0);
                assert!(violation_margin(d, n, 0.0f64) < 0.0);
                let tol = 1e-6;
                let e = critical_e(d, n, tol).unwrap();
                assert!(violation_margin(d, n, e + 10.0 * tol) > 0.0);
                assert!(violation_margin(d, n, e - 10.0 * tol) < 0.0);
            }
        }
    }

    #[test]
    fn d2_approaches_tsirelson_slowly() {
        assert!((critical_e(2, 200, 1e-6).unwrap() - FRAC_1_SQRT_2).abs() <= 1e-3);
        assert!(critical_e(2, 30, 1e-6).unwrap() - FRAC_1_SQRT_2 > 3e-3);
    }

    #[test]
    fn single_precision_root() {
        let e = critical_e(2, 1, 1e-5f32).unwrap();
        assert!((e - 0.779_944).abs() < 2e-5);
    }

    #[test]
    fn errors() {
        assert!(critical_e(2, 1, 0.0).is_err());
        assert!(critical_e(2, 1, -1e-3).is_err());
        assert!(critical_e(1, 1, 1e-6).is_err());
        assert!(critical_e(2, 0, 1e-6).is_err());
        assert!(critical_e(2, MAX_THRESHOLD_DEPTH + 1, 1e-6).is_err());
        assert!(curve(2, 0, 1e-6).is_err());
    }

    #[test]
    fn d2_curve_strictly_decreasing() {
        let c = curve(2, 30, 1e-9).unwrap();
        assert!(c
            .records
            .windows(2)
            .all(|w| w[1].e_critical < w[0].e_critical));
        assert_eq!(c.n_at_optimum, 30);
    }

    #[test]
    fn interior_minimum_moves_left_with_d() {
        let c5 = curve(5, 40, 1e-7).unwrap();
        let c10 = curve(10, 30, 1e-7).unwrap();
        assert_eq!(c5.n_at_optimum, 7);
        assert_eq!(c10.n_at_optimum, 5);
        assert!(c10.n_at_optimum <= c5.n_at_optimum);
        assert!(c10.e_optimal < FRAC_1_SQRT_2);
        let min = c10
            .records
            .iter()
            .map(|r| r.e_critical)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, c10.e_optimal);
    }

    #[test]
    fn large_d_dips_below_tsirelson() {
        for d in [10, 20, 50] {
            let c = curve(d, 40, 1e-7).unwrap();
            assert!(c.e_optimal < FRAC_1_SQRT_2, "d={d}");
        }
    }

    #[test]
    fn table_rows() {
        let rows = table_one(&[3, 4, 5], 40, 1e-6).unwrap();
        assert!(rows[0].e_ic <= 0.708 + 1e-3);
        assert!(rows[1].e_ic <= 0.705 + 1e-3);
        assert!(rows[2].e_ic <= 0.700 + 1e-3);
        assert_eq!(rows[2].rounded(), 0.7);
    }

    #[test]
    fn csv_layout() {
        let c = curve(2, 2, 1e-9).unwrap();
        let text = curves_csv(&[c]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "d,n,e_critical");
        assert_eq!(lines[1], "2,1,0.779944");
        let rows = table_one(&[5], 40, 1e-7).unwrap();
        assert_eq!(table_csv(&rows), "d,e_ic,n_at_opt\n5,0.699831,7\n");
    }
}

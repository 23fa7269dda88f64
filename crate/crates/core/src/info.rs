//! Entropies, mutual information and the Fano lower bound, all in bits.

use crate::boxes::{check_alphabet, TOL_PROB};
use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Joint distribution `q[u][v]` over a finite product alphabet, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution<T> {
    rows: usize,
    cols: usize,
    table: Vec<T>,
}

impl<T: Real> JointDistribution<T> {
    pub fn new(rows: usize, cols: usize, table: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || table.len() != rows * cols {
            return Err(Error::InvalidDistribution(format!(
                "table of {} entries does not have shape {rows}x{cols}",
                table.len()
            )));
        }
        let tol = T::lit(TOL_PROB);
        if let Some(bad) = table.iter().find(|&&q| !(q >= -tol)) {
            return Err(Error::InvalidDistribution(format!(
                "entry {bad} is negative"
            )));
        }
        let total = table.iter().fold(T::zero(), |acc, &q| acc + q);
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self { rows, cols, table })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDistribution("ragged table".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn get(&self, u: usize, v: usize) -> T {
        self.table[u * self.cols + v]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_marginal(&self) -> Vec<T> {
        self.table
            .chunks(self.cols)
            .map(|r| r.iter().fold(T::zero(), |acc, &q| acc + q))
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.cols];
        for row in self.table.chunks(self.cols) {
            for (acc, &q) in m.iter_mut().zip(row) {
                *acc = *acc + q;
            }
        }
        m
    }
}

/// `h(p) = −p log₂ p − (1−p) log₂(1−p)` with `0 log 0 = 0`.
pub fn binary_entropy<T: Real>(p: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(domain(format!("binary entropy needs p in [0, 1], got {p}")));
    }
    Ok(xlog2x_neg(p) + xlog2x_neg(T::one() - p))
}

#[inline]
fn xlog2x_neg<T: Real>(p: T) -> T {
    if p <= T::zero() {
        T::zero()
    } else {
        -p * p.log2()
    }
}

/// Shannon mutual information `I(U:V)` in bits.
pub fn mutual_information<T: Real>(q: &JointDistribution<T>) -> T {
    let pu = q.row_marginal();
    let pv = q.col_marginal();
    let mut total = T::zero();
    for (u, &mu) in pu.iter().enumerate() {
        for (v, &mv) in pv.iter().enumerate() {
            let p = q.get(u, v);
            if p > T::zero() {
                total = total + p * (p / (mu * mv)).log2();
            }
        }
    }
    // rounding can leave tiny negative values for product tables
    total.max(T::zero())
}

/// `(1 + x) ln(1 + x) − x` for `x ≥ −1`, accurate to relative precision near zero.
pub(crate) fn excess_xlogx<T: Real>(x: T) -> T {
    if x <= -T::one() {
        return T::one();
    }
    if x.abs() < T::lit(0.05) {
        // Σ_{k≥2} (−x)^k / (k (k−1)) alternating in sign of x
        let mut power = x * x;
        let mut sum = T::zero();
        let mut k = 2usize;
        loop {
            let term = power / T::from_count(k * (k - 1));
            sum = sum + term;
            if term.abs() <= T::epsilon() * sum.abs() || k > 60 {
                return sum;
            }
            power = -power * x;
            k += 1;
        }
    }
    (T::one() + x) * x.ln_1p() - x
}

/// Per-dit Fano expression `log₂ d − h(P) − (1−P) log₂(d−1)` written as a function of the
/// bias `t = (dP − 1)/(d − 1)`. Exact rearrangement that stays accurate when `t → 0`.
pub fn fano_per_dit_from_bias<T: Real>(d: usize, t: T) -> T {
    let dm1 = T::from_count(d - 1);
    let u = dm1 * t;
    (excess_xlogx(u) + dm1 * excess_xlogx(-t)) / (T::from_count(d) * T::LN_2())
}

/// Fano lower bound on `I` for `dits` input dits each guessed with probability `p_success`.
///
/// For `d = 2` the `(1−P) log₂(d−1)` term vanishes.
pub fn fano_lower_bound<T: Real>(d: usize, p_success: T, dits: u64) -> Result<T> {
    check_alphabet(d)?;
    if !(p_success >= T::zero() && p_success <= T::one()) {
        return Err(domain(format!(
            "success probability must lie in [0, 1], got {p_success}"
        )));
    }
    if dits == 0 {
        return Err(domain("the number of dits must be positive"));
    }
    let dd = T::from_count(d);
    let t = (dd * p_success - T::one()) / T::from_count(d - 1);
    let n = T::from_u64(dits).ok_or_else(|| domain("dit count not representable"))?;
    Ok(n * fano_per_dit_from_bias(d, t))
}

/// Fano bound of the depth-`depth` nested protocol on isotropic boxes of weight `e`:
/// `2^depth` dits each guessed with bias `e^depth`.
pub fn isotropic_fano_bound<T: Real>(d: usize, depth: u32, e: T) -> T {
    let exponent = i32::try_from(depth).unwrap_or(i32::MAX);
    T::lit(2.0).powi(exponent) * fano_per_dit_from_bias(d, e.powi(exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook form, fine away from chance level.
    fn fano_naive(d: usize, p: f64, n: f64) -> f64 {
        let h = binary_entropy(p).unwrap();
        n * ((d as f64).log2() - h - (1.0 - p) * ((d - 1) as f64).log2())
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // mpmath, 30 digits: h(0.11) = 0.499915958164527995...
        assert!((binary_entropy(0.11f64).unwrap() - 0.499_915_958_164_528).abs() < 1e-15);
        assert!((binary_entropy(0.11f32).unwrap() - 0.499_916).abs() < 1e-5);
        assert!(binary_entropy(1.2).is_err());
        assert!(binary_entropy(-0.2).is_err());
    }

    #[test]
    fn mutual_information_basics() {
        let r = [0.2, 0.3, 0.5];
        let s = [0.6, 0.4];
        let product: Vec<Vec<f64>> = r
            .iter()
            .map(|a| s.iter().map(|b| a * b).collect())
            .collect();
        let q = JointDistribution::from_rows(&product).unwrap();
        assert!(mutual_information(&q).abs() < 1e-15);

        for d in 2..=7usize {
            let mut t = vec![0.0; d * d];
            for i in 0..d {
                t[i * d + i] = 1.0 / d as f64;
            }
            let q = JointDistribution::new(d, d, t).unwrap();
            assert!((mutual_information(&q) - (d as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_joint_distributions() {
        assert!(JointDistribution::new(2, 2, vec![0.5, 0.5, 0.5, 0.5]).is_err());
        assert!(JointDistribution::new(2, 2, vec![1.1, -0.1, 0.0, 0.0]).is_err());
        assert!(JointDistribution::new(2, 3, vec![0.25; 4]).is_err());
        assert!(JointDistribution::<f64>::from_rows(&[vec![0.5], vec![0.25, 0.25]]).is_err());
    }

    #[test]
    fn single_box_protocol_joint() {
        // (x0, G | y=0) for isotropic d=3, E=0.5: G = x0 with prob P, otherwise uniform over the
        // other two values.
        let d = 3;
        let p = (2.0 * 0.5 + 1.0) / 3.0;
        let mut t = vec![0.0; 9];
        for x in 0..d {
            for g in 0..d {
                t[x * d + g] = if x == g { p / 3.0 } else { (1.0 - p) / 6.0 };
            }
        }
        let q = JointDistribution::new(d, d, t.clone()).unwrap();
        // direct sum with marginals 1/3 on both sides
        let oracle: f64 = t
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v: &f64| v * (v / (1.0 / 9.0)).log2())
            .sum();
        assert!((mutual_information(&q) - oracle).abs() < 1e-14);
        // Fano is tight for this symmetric channel
        assert!((mutual_information(&q) - fano_lower_bound(3, p, 1).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn fano_special_points() {
        for d in 2..=10usize {
            for n in [1u64, 2, 8, 1024] {
                let full = fano_lower_bound(d, 1.0, n).unwrap();
                assert!((full - n as f64 * (d as f64).log2()).abs() < 1e-9 * n as f64);
            }
            let chance = fano_lower_bound(d, 1.0 / d as f64, 4).unwrap();
            assert!(chance.abs() < 1e-12, "d={d} chance={chance}");
        }
        // d = 2, P = 0.82 (E = 0.8, n = 2): 4 (1 − h(0.82))
        let expected: f64 = 4.0 * (1.0 - binary_entropy(0.82f64).unwrap());
        assert!((fano_lower_bound(2, 0.82f64, 4).unwrap() - expected).abs() < 1e-13);
        // mpmath: 4*(1 - h(0.82)) = 1.279691817086880...
        assert!((expected - 1.279_691_817_086_88).abs() < 1e-12);
    }

    #[test]
    fn fano_domain_errors() {
        assert!(fano_lower_bound(1, 0.5, 2).is_err());
        assert!(fano_lower_bound(3, 1.5, 2).is_err());
        assert!(fano_lower_bound(3, 0.5, 0).is_err());
    }

    #[test]
    fn stable_form_matches_naive_away_from_chance() {
        for d in 2..=10usize {
            for i in 0..=100 {
                let p = i as f64 / 100.0;
                let stable = fano_lower_bound(d, p, 1).unwrap();
                assert!(
                    (stable - fano_naive(d, p, 1.0)).abs() < 1e-12,
                    "d={d} p={p}"
                );
            }
        }
    }

    #[test]
    fn stable_form_small_bias() {
        // leading term (d−1) t² / (2 ln 2) − (d−1)(d−2) t³ / (6 ln 2)
        for d in [2usize, 3, 5, 10] {
            let t = 1e-9;
            let dm1 = (d - 1) as f64;
            let leading = dm1 * t * t / (2.0 * std::f64::consts::LN_2)
                - dm1 * (dm1 - 1.0) * t.powi(3) / (6.0 * std::f64::consts::LN_2);
            let got = fano_per_dit_from_bias(d, t);
            assert!(((got - leading) / leading).abs() < 1e-9, "d={d}");
        }
        assert_eq!(fano_per_dit_from_bias(3, 1.0), (3f64).log2());
    }

    #[test]
    fn excess_xlogx_branches_agree() {
        for &x in &[-0.049, -0.01, 0.01, 0.049] {
            let direct = (1.0f64 + x) * x.ln_1p() - x;
            assert!(((excess_xlogx(x) - direct) / direct).abs() < 1e-12);
        }
        assert_eq!(excess_xlogx(-1.0f64), 1.0);
    }

    proptest! {
        #[test]
        fn fano_monotone_above_chance(d in 2usize..12, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let lo = 1.0 / d as f64 + (1.0 - 1.0 / d as f64) * a.min(b);
            let hi = 1.0 / d as f64 + (1.0 - 1.0 / d as f64) * a.max(b);
            prop_assert!(fano_lower_bound(d, lo, 3).unwrap() <= fano_lower_bound(d, hi, 3).unwrap() + 1e-15);
        }

        #[test]
        fn mutual_information_zero_iff_product(
            r in proptest::collection::vec(0.01f64..1.0, 2..5),
            s in proptest::collection::vec(0.01f64..1.0, 2..5),
            mass in 0.05f64..0.5,
        ) {
            let rs: f64 = r.iter().sum();
            let ss: f64 = s.iter().sum();
            let rows: Vec<Vec<f64>> = r.iter().map(|a| s.iter().map(|b| a * b / (rs * ss)).collect()).collect();
            let q = JointDistribution::from_rows(&rows).unwrap();
            prop_assert!(mutual_information(&q) < 1e-12);

            // move mass onto the (0,0) cell from (0,1) and (1,0), compensated on (1,1):
            // same marginals, no longer a product
            let mut corr = rows.clone();
            let shift = mass * corr[0][1].min(corr[1][0]);
            corr[0][0] += shift;
            corr[1][1] += shift;
            corr[0][1] -= shift;
            corr[1][0] -= shift;
            let q = JointDistribution::from_rows(&corr).unwrap();
            prop_assert!(mutual_information(&q) > 0.0);
        }
    }
}

//! Level-1 NPA relaxation (`Q₁`, equivalently macroscopic locality).
//!
//! A box belongs to `Q₁` iff the moment matrix indexed by `{1} ∪ {A(x,a)} ∪ {B(y,b)}` admits a
//! positive semidefinite completion. Entries between projectors of the same party with different
//! inputs are unobservable and left free; every other entry is fixed by the box.

use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::{check_alphabet, make_isotropic, CorrelationBox, NoiseParameter};
use crate::eigen::{symmetric_eigen, Matrix};
use crate::error::{domain, Result};
use crate::scalar::Real;

pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 20_000;
/// Smallest accepted bracket width for [`critical_e_ml`].
pub const MIN_TOL_E: f64 = 1e-4;

/// Row/column label of the moment matrix. Each measurement drops its last outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorIndex {
    Identity,
    Alice { x: usize, a: usize },
    Bob { y: usize, b: usize },
}

impl std::fmt::Display for OperatorIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatorIndex::Identity => write!(f, "1"),
            OperatorIndex::Alice { x, a } => write!(f, "A{x}:{a}"),
            OperatorIndex::Bob { y, b } => write!(f, "B{y}:{b}"),
        }
    }
}

/// Moment matrix with the mask of entries fixed by the box.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix<T> {
    pub operators: Vec<OperatorIndex>,
    pub entries: Matrix<T>,
    known: Vec<bool>,
}

impl<T: Real> MomentMatrix<T> {
    pub fn size(&self) -> usize {
        self.operators.len()
    }

    pub fn is_known(&self, i: usize, j: usize) -> bool {
        self.known[i * self.size() + j]
    }

    pub fn free_pairs(&self) -> usize {
        let n = self.size();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !self.is_known(i, j))
            .count()
    }

    /// Overwrites the fixed entries of `m` with their values and symmetrizes.
    pub fn project_affine(&self, m: &mut Matrix<T>) {
        let n = self.size();
        for i in 0..n {
            for j in 0..n {
                if self.is_known(i, j) {
                    m[(i, j)] = self.entries[(i, j)];
                }
            }
        }
        m.symmetrize();
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc {
            operators: Vec<String>,
            entries: Vec<Vec<f64>>,
            known: Vec<Vec<bool>>,
        }
        let n = self.size();
        let doc = Doc {
            operators: self.operators.iter().map(ToString::to_string).collect(),
            entries: self
                .entries
                .rows()
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
            known: (0..n)
                .map(|i| (0..n).map(|j| self.is_known(i, j)).collect())
                .collect(),
        };
        serde_json::to_string(&doc).expect("moment matrix serializes")
    }
}

/// Level-1 moment matrix of `b`; free entries start at the product of marginals.
///
/// Marginals are read at the other party's input 0, which is exact for no-signalling boxes.
pub fn build_moment<T: Real>(b: &CorrelationBox<T>) -> Result<MomentMatrix<T>> {
    let s = b.scenario();
    let mut operators = vec![OperatorIndex::Identity];
    for x in 0..s.num_inputs_a {
        for a in 0..s.num_outputs_a - 1 {
            operators.push(OperatorIndex::Alice { x, a });
        }
    }
    for y in 0..s.num_inputs_b {
        for bb in 0..s.num_outputs_b - 1 {
            operators.push(OperatorIndex::Bob { y, b: bb });
        }
    }
    let alice: Vec<Vec<T>> = (0..s.num_inputs_a)
        .map(|x| b.marginal_a(x, 0))
        .collect::<Result<_>>()?;
    let bob: Vec<Vec<T>> = (0..s.num_inputs_b)
        .map(|y| b.marginal_b(0, y))
        .collect::<Result<_>>()?;
    let expectation = |op: OperatorIndex| match op {
        OperatorIndex::Identity => T::one(),
        OperatorIndex::Alice { x, a } => alice[x][a],
        OperatorIndex::Bob { y, b } => bob[y][b],
    };

    let n = operators.len();
    let mut known = vec![false; n * n];
    let entries = Matrix::from_fn(n, |i, j| {
        use OperatorIndex::*;
        let (oi, oj) = (operators[i], operators[j]);
        let fixed = match (oi, oj) {
            (Identity, o) | (o, Identity) => Some(expectation(o)),
            (Alice { x, a }, Alice { x: x2, a: a2 }) if x == x2 => {
                Some(if a == a2 { alice[x][a] } else { T::zero() })
            }
            (Bob { y, b }, Bob { y: y2, b: b2 }) if y == y2 => {
                Some(if b == b2 { bob[y][b] } else { T::zero() })
            }
            (Alice { x, a }, Bob { y, b: bb }) | (Bob { y, b: bb }, Alice { x, a }) => {
                Some(b.get(a, bb, x, y))
            }
            _ => None,
        };
        known[i * n + j] = fixed.is_some();
        fixed.unwrap_or_else(|| expectation(oi) * expectation(oj))
    });
    Ok(MomentMatrix {
        operators,
        entries,
        known,
    })
}

/// Eigenvalue clamping onto `{X ⪰ 0}`; also returns the smallest eigenvalue of the input.
pub fn project_psd<T: Real>(m: &Matrix<T>) -> Result<(Matrix<T>, T)> {
    let eig = symmetric_eigen(m)?;
    Ok((eig.reassemble(|l| l.max(T::zero())), eig.min_value()))
}

/// Iteration used to search the intersection of the PSD cone and the affine slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionScheme {
    /// Plain alternating projections `X ← P_aff(P_psd(X))`.
    Alternating,
    /// Averaged alternating reflections `Z ← Z + P_psd(2 P_aff Z − Z) − P_aff Z`; the
    /// shadow `P_aff Z` is the tested iterate.
    #[default]
    DouglasRachford,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q1Options<T> {
    pub tol: T,
    pub max_iter: usize,
    pub scheme: ProjectionScheme,
    /// Iterations between stall checks.
    pub stall_window: usize,
}

impl<T: Real> Default for Q1Options<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_FEASIBILITY_TOL),
            max_iter: DEFAULT_MAX_ITER,
            scheme: ProjectionScheme::default(),
            stall_window: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Affine iterate reached `λ_min ≥ −tol`.
    Certified,
    /// Deficit stopped shrinking well above `tol`.
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct Q1Verdict<T> {
    pub feasible: bool,
    /// `max(0, −λ_min)` of the last affine iterate.
    pub residual: T,
    pub iterations: usize,
    pub termination: Termination,
    /// Last affine iterate: a certificate when feasible.
    pub completion: Matrix<T>,
}

/// Decides `Q₁` membership of `b` by searching for a PSD completion of its moment matrix.
pub fn q1_feasible<T: Real>(b: &CorrelationBox<T>, opts: &Q1Options<T>) -> Result<Q1Verdict<T>> {
    let moment = build_moment(b)?;
    q1_feasible_moment(&moment, opts)
}

pub fn q1_feasible_moment<T: Real>(
    moment: &MomentMatrix<T>,
    opts: &Q1Options<T>,
) -> Result<Q1Verdict<T>> {
    if !(opts.tol > T::zero()) || opts.max_iter == 0 || opts.stall_window == 0 {
        return Err(domain(
            "q1 options need tol > 0, max_iter > 0 and stall_window > 0",
        ));
    }
    let mut z = moment.entries.clone();
    let mut best = T::infinity();
    let mut best_at_checkpoint = T::infinity();
    let stall_floor = opts.tol * T::lit(100.0);

    let verdict = |feasible, deficit: T, iterations, termination, completion| Q1Verdict {
        feasible,
        residual: deficit.max(T::zero()),
        iterations,
        termination,
        completion,
    };

    for it in 0..opts.max_iter {
        let mut shadow = z.clone();
        moment.project_affine(&mut shadow);
        let eig = symmetric_eigen(&shadow)?;
        let deficit = -eig.min_value();
        if deficit <= opts.tol {
            return Ok(verdict(true, deficit, it, Termination::Certified, shadow));
        }
        best = best.min(deficit);
        if (it + 1) % opts.stall_window == 0 {
            if best > stall_floor && best > best_at_checkpoint * T::lit(0.99) {
                return Ok(verdict(
                    false,
                    deficit,
                    it + 1,
                    Termination::Stalled,
                    shadow,
                ));
            }
            best_at_checkpoint = best;
        }
        z = match opts.scheme {
            ProjectionScheme::Alternating => eig.reassemble(|l| l.max(T::zero())),
            ProjectionScheme::DouglasRachford => {
                let reflected = Matrix::from_fn(shadow.size(), |i, j| {
                    shadow[(i, j)] + shadow[(i, j)] - z[(i, j)]
                });
                let (psd, _) = project_psd(&reflected)?;
                Matrix::from_fn(shadow.size(), |i, j| {
                    z[(i, j)] + psd[(i, j)] - shadow[(i, j)]
                })
            }
        };
    }
    let mut shadow = z;
    moment.project_affine(&mut shadow);
    let deficit = -symmetric_eigen(&shadow)?.min_value();
    let feasible = deficit <= opts.tol;
    let termination = if feasible {
        Termination::Certified
    } else {
        Termination::MaxIter
    };
    Ok(verdict(
        feasible,
        deficit,
        opts.max_iter,
        termination,
        shadow,
    ))
}

/// Result of the `E_ML` bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlThreshold<T> {
    pub d: usize,
    pub e_ml: T,
    pub evaluations: usize,
    pub max_iter_hits: usize,
}

impl<T> MlThreshold<T> {
    pub fn max_iter_fraction(&self) -> f64 {
        self.max_iter_hits as f64 / self.evaluations.max(1) as f64
    }
}

/// Bisects the isotropic line for the boundary of `Q₁` to within `tol_e`.
///
/// The line starts at the feasible white-noise box and `Q₁` is convex, so feasibility is
/// monotone in `E`.
pub fn critical_e_ml<T: Real>(d: usize, tol_e: T, opts: &Q1Options<T>) -> Result<MlThreshold<T>> {
    check_alphabet(d)?;
    if !(tol_e >= T::lit(MIN_TOL_E)) {
        return Err(domain(format!(
            "tol_e must be at least {MIN_TOL_E}, got {tol_e}"
        )));
    }
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut evaluations = 0;
    let mut max_iter_hits = 0;
    let mut feasible_at = |e: T| -> Result<bool> {
        let b = make_isotropic(d, NoiseParameter::new(e)?)?;
        let v = q1_feasible(&b, opts)?;
        evaluations += 1;
        if v.termination == Termination::MaxIter {
            max_iter_hits += 1;
        }
        Ok(v.feasible)
    };
    if !feasible_at(lo)? {
        return Err(domain(
            "white-noise box failed the Q1 test; solver options too strict",
        ));
    }
    if feasible_at(hi)? {
        return Ok(MlThreshold {
            d,
            e_ml: hi,
            evaluations,
            max_iter_hits,
        });
    }
    while hi - lo > tol_e {
        let mid = (lo + hi) * T::lit(0.5);
        if feasible_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MlThreshold {
        d,
        e_ml: (lo + hi) * T::lit(0.5),
        evaluations,
        max_iter_hits,
    })
}

/// [`critical_e_ml`] for several alphabet sizes in parallel, results in input order.
pub fn critical_e_ml_many<T: Real>(
    d_list: &[usize],
    tol_e: T,
    opts: &Q1Options<T>,
) -> Result<Vec<MlThreshold<T>>> {
    d_list
        .par_iter()
        .map(|&d| critical_e_ml(d, tol_e, opts))
        .collect()
}

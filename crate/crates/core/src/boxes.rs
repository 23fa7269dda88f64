//! Bipartite conditional probability boxes `p(a b | x y)`.
//!
//! Alice has input `x` and output `a`, Bob has input `y` and output `b`. The
//! generalized PR boxes live in the `(d, 2, d, d)` scenario: `d` inputs for
//! Alice, a binary input for Bob and `d` outcomes on both sides.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::{Real, Scalar};

/// Absolute tolerance used when validating constructed boxes.
pub const TOL_PROB: f64 = 1e-12;

/// Input and output cardinalities of a two-party scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scenario {
    pub num_inputs_a: usize,
    pub num_inputs_b: usize,
    pub num_outputs_a: usize,
    pub num_outputs_b: usize,
}

impl Scenario {
    pub fn new(
        num_inputs_a: usize,
        num_inputs_b: usize,
        num_outputs_a: usize,
        num_outputs_b: usize,
    ) -> Result<Self> {
        if num_inputs_a == 0 || num_inputs_b == 0 || num_outputs_a == 0 || num_outputs_b == 0 {
            return Err(domain("every scenario cardinality must be at least 1"));
        }
        Ok(Self {
            num_inputs_a,
            num_inputs_b,
            num_outputs_a,
            num_outputs_b,
        })
    }

    /// The `d2dd` scenario of the d-ary guessing game.
    pub fn d2dd(d: usize) -> Result<Self> {
        check_alphabet(d)?;
        Self::new(d, 2, d, d)
    }

    /// `Some(d)` when this is the `(d, 2, d, d)` scenario with `d >= 2`.
    pub fn alphabet(&self) -> Option<usize> {
        let d = self.num_inputs_a;
        (d >= 2 && self.num_inputs_b == 2 && self.num_outputs_a == d && self.num_outputs_b == d)
            .then_some(d)
    }

    pub fn len(&self) -> usize {
        self.num_outputs_a * self.num_outputs_b * self.num_inputs_a * self.num_inputs_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cardinalities in document order `[nx, ny, da, db]`.
    pub fn as_array(&self) -> [usize; 4] {
        [
            self.num_inputs_a,
            self.num_inputs_b,
            self.num_outputs_a,
            self.num_outputs_b,
        ]
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.num_inputs_a, self.num_inputs_b, self.num_outputs_a, self.num_outputs_b
        )
    }
}

pub(crate) fn check_alphabet(d: usize) -> Result<()> {
    if d < 2 {
        return Err(domain(format!("alphabet size must be at least 2, got {d}")));
    }
    Ok(())
}

/// Mixing weight `E` of the isotropic family, constrained to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseParameter<T>(T);

impl<T: Scalar> NoiseParameter<T> {
    pub fn new(e: T) -> Result<Self> {
        // written so that NaN is rejected too
        if !(e >= T::zero() && e <= T::one()) {
            return Err(domain(format!(
                "noise parameter must lie in [0, 1], got {e}"
            )));
        }
        Ok(Self(e))
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// A conditional distribution `p(a b | x y)` stored densely in `(a, b, x, y)` row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationBox<T> {
    scenario: Scenario,
    probs: Vec<T>,
}

impl<T: Scalar> CorrelationBox<T> {
    /// Builds a box by evaluating `f(a, b, x, y)` on every index tuple. No validation.
    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut probs = Vec::with_capacity(scenario.len());
        for a in 0..scenario.num_outputs_a {
            for b in 0..scenario.num_outputs_b {
                for x in 0..scenario.num_inputs_a {
                    for y in 0..scenario.num_inputs_b {
                        probs.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self { scenario, probs }
    }

    /// Wraps a raw `(a, b, x, y)` row-major table. Only the length is checked.
    pub fn from_raw(scenario: Scenario, probs: Vec<T>) -> Result<Self> {
        if probs.len() != scenario.len() {
            return Err(Error::Format(format!(
                "expected {} entries for scenario {scenario}, got {}",
                scenario.len(),
                probs.len()
            )));
        }
        Ok(Self { scenario, probs })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Raw entries in `(a, b, x, y)` row-major order.
    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    #[inline]
    fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let s = &self.scenario;
        ((a * s.num_outputs_b + b) * s.num_inputs_a + x) * s.num_inputs_b + y
    }

    /// `p(a b | x y)`. Panics when an index is out of range.
    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> T {
        let s = &self.scenario;
        assert!(
            a < s.num_outputs_a && b < s.num_outputs_b && x < s.num_inputs_a && y < s.num_inputs_b,
            "box index ({a}, {b}, {x}, {y}) out of range for scenario {s}"
        );
        self.probs[self.index(a, b, x, y)]
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Scalar>(&self) -> CorrelationBox<U> {
        CorrelationBox {
            scenario: self.scenario,
            probs: self
                .probs
                .iter()
                .map(|p| U::lit(p.to_f64_lossy()))
                .collect(),
        }
    }

    /// Lists every normalization failure and every negative entry.
    pub fn validate(&self, tol: T) -> ValidationReport {
        let s = self.scenario;
        let mut violations = Vec::new();
        for x in 0..s.num_inputs_a {
            for y in 0..s.num_inputs_b {
                let mut sum = T::zero();
                for a in 0..s.num_outputs_a {
                    for b in 0..s.num_outputs_b {
                        let p = self.get(a, b, x, y);
                        if p < -tol {
                            violations.push(Violation::Negative {
                                a,
                                b,
                                x,
                                y,
                                value: p.to_f64_lossy(),
                            });
                        }
                        sum = sum + p;
                    }
                }
                if (sum - T::one()).abs() > tol {
                    violations.push(Violation::Normalization {
                        x,
                        y,
                        sum: sum.to_f64_lossy(),
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    fn check_inputs(&self, x: usize, y: usize) -> Result<()> {
        let s = &self.scenario;
        if x >= s.num_inputs_a || y >= s.num_inputs_b {
            return Err(Error::Index(format!(
                "inputs (x={x}, y={y}) outside scenario {s}"
            )));
        }
        Ok(())
    }

    /// Alice's conditional marginal `p(a | x y)`.
    pub fn marginal_a(&self, x: usize, y: usize) -> Result<Vec<T>> {
        self.check_inputs(x, y)?;
        let s = &self.scenario;
        Ok((0..s.num_outputs_a)
            .map(|a| (0..s.num_outputs_b).fold(T::zero(), |acc, b| acc + self.get(a, b, x, y)))
            .collect())
    }

    /// Bob's conditional marginal `p(b | x y)`.
    pub fn marginal_b(&self, x: usize, y: usize) -> Result<Vec<T>> {
        self.check_inputs(x, y)?;
        let s = &self.scenario;
        Ok((0..s.num_outputs_b)
            .map(|b| (0..s.num_outputs_a).fold(T::zero(), |acc, a| acc + self.get(a, b, x, y)))
            .collect())
    }

    /// True when neither party's marginal depends on the other party's input.
    pub fn is_nonsignalling(&self, tol: T) -> bool {
        let s = self.scenario;
        let close = |u: &[T], v: &[T]| u.iter().zip(v).all(|(&p, &q)| (p - q).abs() <= tol);
        for x in 0..s.num_inputs_a {
            let reference = self.marginal_a(x, 0).expect("in range");
            for y in 1..s.num_inputs_b {
                if !close(&reference, &self.marginal_a(x, y).expect("in range")) {
                    return false;
                }
            }
        }
        for y in 0..s.num_inputs_b {
            let reference = self.marginal_b(0, y).expect("in range");
            for x in 1..s.num_inputs_a {
                if !close(&reference, &self.marginal_b(x, y).expect("in range")) {
                    return false;
                }
            }
        }
        true
    }

    /// Largest entrywise absolute difference against a box of the same scenario.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        same_scenario(self.scenario, other.scenario)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .fold(T::zero(), |m, (&p, &q)| {
                let d = (p - q).abs();
                if d > m {
                    d
                } else {
                    m
                }
            }))
    }

    /// JSON document `{"scenario":[nx,ny,da,db],"probs":[x][y][a][b]}`.
    pub fn to_document(&self) -> BoxDocument {
        let s = self.scenario;
        let probs = (0..s.num_inputs_a)
            .map(|x| {
                (0..s.num_inputs_b)
                    .map(|y| {
                        (0..s.num_outputs_a)
                            .map(|a| {
                                (0..s.num_outputs_b)
                                    .map(|b| self.get(a, b, x, y).to_f64_lossy())
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        BoxDocument {
            scenario: s.as_array(),
            probs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("box documents always serialize")
    }
}

impl<T: Real> CorrelationBox<T> {
    /// Parses a box document. The shape is checked, the probabilities are not.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BoxDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.into_box()
    }
}

fn same_scenario(expected: Scenario, found: Scenario) -> Result<()> {
    if expected != found {
        return Err(Error::ScenarioMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Serialized form of a box; `probs` is nested `[x][y][a][b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDocument {
    pub scenario: [usize; 4],
    pub probs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl BoxDocument {
    pub fn into_box<T: Real>(self) -> Result<CorrelationBox<T>> {
        let [nx, ny, da, db] = self.scenario;
        let scenario = Scenario::new(nx, ny, da, db)?;
        let shape_ok = self.probs.len() == nx
            && self.probs.iter().all(|py| {
                py.len() == ny
                    && py
                        .iter()
                        .all(|pa| pa.len() == da && pa.iter().all(|pb| pb.len() == db))
            });
        if !shape_ok {
            return Err(Error::Format(format!(
                "probs array does not have shape [{nx}][{ny}][{da}][{db}]"
            )));
        }
        Ok(CorrelationBox::from_fn(scenario, |a, b, x, y| {
            T::lit(self.probs[x][y][a][b])
        }))
    }
}

/// A single constraint failure found by [`CorrelationBox::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Normalization {
        x: usize,
        y: usize,
        sum: f64,
    },
    Negative {
        a: usize,
        b: usize,
        x: usize,
        y: usize,
        value: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Normalization { x, y, sum } => {
                write!(f, "normalization: sum over (a,b) at x={x}, y={y} is {sum}")
            }
            Violation::Negative { a, b, x, y, value } => {
                write!(f, "negative entry p({a}{b}|{x}{y}) = {value}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `(b - a + j) mod d == (x * y) mod d`.
#[inline]
pub(crate) fn pr_rule(d: usize, j: usize, a: usize, b: usize, x: usize, y: usize) -> bool {
    (b + d - a + j) % d == (x * y) % d
}

/// Generalized PR box: uniform over the outcome pairs with `x·y ≡ (b − a) + j (mod d)`.
pub fn make_pr_j<T: Scalar>(d: usize, j: usize) -> Result<CorrelationBox<T>> {
    let scenario = Scenario::d2dd(d)?;
    if j >= d {
        return Err(domain(format!("PR box shift j={j} must be below d={d}")));
    }
    let weight = T::one() / T::from_count(d);
    Ok(CorrelationBox::from_fn(scenario, |a, b, x, y| {
        if pr_rule(d, j, a, b, x, y) {
            weight
        } else {
            T::zero()
        }
    }))
}

/// The white-noise box with every entry `1/d²`.
pub fn make_uniform<T: Scalar>(d: usize) -> Result<CorrelationBox<T>> {
    let scenario = Scenario::d2dd(d)?;
    let weight = T::one() / T::from_count(d * d);
    Ok(CorrelationBox::from_fn(scenario, |_, _, _, _| weight))
}

/// `E·PR₀ + (1 − E)·Uniform`.
pub fn make_isotropic<T: Scalar>(d: usize, e: NoiseParameter<T>) -> Result<CorrelationBox<T>> {
    let scenario = Scenario::d2dd(d)?;
    let e = e.value();
    let dd = T::from_count(d);
    let noise = (T::one() - e) / (dd * dd);
    let signal = e / dd;
    Ok(CorrelationBox::from_fn(scenario, |a, b, x, y| {
        if pr_rule(d, 0, a, b, x, y) {
            signal + noise
        } else {
            noise
        }
    }))
}

/// Local deterministic box: Alice answers `alice[x]`, Bob answers `bob[y]`.
pub fn make_deterministic<T: Scalar>(
    scenario: Scenario,
    alice: &[usize],
    bob: &[usize],
) -> Result<CorrelationBox<T>> {
    if alice.len() != scenario.num_inputs_a || bob.len() != scenario.num_inputs_b {
        return Err(domain("one response per input is required"));
    }
    if alice.iter().any(|&a| a >= scenario.num_outputs_a)
        || bob.iter().any(|&b| b >= scenario.num_outputs_b)
    {
        return Err(domain(
            "deterministic response outside the outcome alphabet",
        ));
    }
    Ok(CorrelationBox::from_fn(scenario, |a, b, x, y| {
        if alice[x] == a && bob[y] == b {
            T::one()
        } else {
            T::zero()
        }
    }))
}

/// Entrywise convex combination of boxes sharing one scenario.
pub fn mix<T: Scalar>(boxes: &[CorrelationBox<T>], weights: &[T]) -> Result<CorrelationBox<T>> {
    let first = boxes
        .first()
        .ok_or_else(|| domain("mix needs at least one box"))?;
    if boxes.len() != weights.len() {
        return Err(domain(format!(
            "{} boxes but {} weights",
            boxes.len(),
            weights.len()
        )));
    }
    for b in &boxes[1..] {
        same_scenario(first.scenario, b.scenario)?;
    }
    let sum = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    if weights.iter().any(|&w| w < T::zero()) || (sum - T::one()).abs() > T::lit(TOL_PROB) {
        return Err(Error::Weights {
            sum: sum.to_f64_lossy(),
        });
    }
    let mut probs = vec![T::zero(); first.probs.len()];
    for (b, &w) in boxes.iter().zip(weights) {
        for (acc, &p) in probs.iter_mut().zip(&b.probs) {
            *acc = *acc + w * p;
        }
    }
    Ok(CorrelationBox {
        scenario: first.scenario,
        probs,
    })
}

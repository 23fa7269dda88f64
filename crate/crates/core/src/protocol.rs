//! The d-ary information causality guessing game.
//!
//! Alice holds `N = 2ⁿ` uniformly random dits, Bob holds `n` selector bits naming one of them.
//! They share `N − 1` boxes arranged as a binary tree and Alice sends a single dit. At each
//! node Alice feeds the difference of the two child values into the box and forwards
//! `(a − left) mod d`; Bob walks from the root to his target leaf, correcting the running
//! guess with `(b − guess) mod d` at every level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boxes::{check_alphabet, make_isotropic, CorrelationBox, NoiseParameter};
use crate::error::{domain, Error, Result};
use crate::info::{isotropic_fano_bound, mutual_information, JointDistribution};
use crate::scalar::{Real, Scalar};

/// Alice always sends one dit.
pub const MESSAGE_DITS: u32 = 1;

/// Deepest tree `simulate_nested` will build (`2²⁰ − 1` boxes per trial).
pub const MAX_SIMULATION_DEPTH: u32 = 20;

/// Cap on `d^N · d^{2(N−1)}` elementary terms for [`exact_information`].
pub const EXACT_BUDGET: f64 = 1e8;

const TRIALS_PER_STREAM: u64 = 4096;

/// Alphabet size, nesting depth and box noise of one protocol instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig<T> {
    pub d: usize,
    pub depth: u32,
    pub noise: NoiseParameter<T>,
}

impl<T: Scalar> ProtocolConfig<T> {
    pub fn new(d: usize, depth: u32, e: T) -> Result<Self> {
        check_alphabet(d)?;
        if depth == 0 {
            return Err(domain("nesting depth must be at least 1"));
        }
        if depth > 63 {
            return Err(domain(format!("nesting depth {depth} exceeds 63")));
        }
        Ok(Self {
            d,
            depth,
            noise: NoiseParameter::new(e)?,
        })
    }

    /// Number of input dits `N = 2ⁿ`.
    pub fn dits(&self) -> u64 {
        1u64 << self.depth
    }

    pub fn e(&self) -> T {
        self.noise.value()
    }
}

/// Success probability, optional exact information and its Fano lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOutcome<T> {
    pub success_probability: T,
    pub exact_information: Option<T>,
    pub fano_bound: T,
}

fn require_d2dd<T: Scalar>(b: &CorrelationBox<T>) -> Result<usize> {
    b.scenario()
        .alphabet()
        .ok_or_else(|| Error::ScenarioMismatch {
            expected: "(d, 2, d, d)".into(),
            found: b.scenario().to_string(),
        })
}

/// Exact success probability of the single-box (`N = 2`) game played with `b`.
///
/// Box input `x` is uniform because Alice's dits are. For `y = 0` Bob is right when
/// `b − a ≡ 0`, for `y = 1` when `b − a ≡ x`.
pub fn success_prob_single<T: Scalar>(b: &CorrelationBox<T>) -> Result<T> {
    let d = require_d2dd(b)?;
    let mut total = T::zero();
    for x in 0..d {
        for a in 0..d {
            total = total + b.get(a, a, x, 0);
            total = total + b.get(a, (a + x) % d, x, 1);
        }
    }
    Ok(total / T::from_count(2 * d))
}

/// `((d − 1) Eⁿ + 1) / d`.
pub fn success_prob_closed<T: Real>(cfg: &ProtocolConfig<T>) -> T {
    let d = T::from_count(cfg.d);
    let en = cfg.e().powi(cfg.depth as i32);
    ((d - T::one()) * en + T::one()) / d
}

/// Joint success of two stacked stages: both right, or both wrong and cancelling.
pub fn success_recurrence<T: Scalar>(p_a: T, p_b: T, d: usize) -> Result<T> {
    check_alphabet(d)?;
    for p in [p_a, p_b] {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(domain(format!("probability {p} outside [0, 1]")));
        }
    }
    let cancel = (T::one() - p_a) * (T::one() - p_b) / T::from_count(d - 1);
    Ok(p_a * p_b + cancel)
}

/// Success after `depth` stages by iterating [`success_recurrence`] from a single-box value.
pub fn iterate_recurrence<T: Scalar>(p_single: T, d: usize, depth: u32) -> Result<T> {
    if depth == 0 {
        return Err(domain("nesting depth must be at least 1"));
    }
    let mut p = p_single;
    for _ in 1..depth {
        p = success_recurrence(p, p_single, d)?;
    }
    Ok(p)
}

/// Whether the Fano lower bound exceeds the `log₂ d` bits carried by one dit.
pub fn ic_violated<T: Real>(cfg: &ProtocolConfig<T>) -> bool {
    let bound = isotropic_fano_bound(cfg.d, cfg.depth, cfg.e());
    bound > T::from_u32(MESSAGE_DITS).expect("small integer") * T::from_count(cfg.d).log2()
}

/// Per-`(x, y)` cumulative outcome tables over the flattened `a·d + b` index.
struct OutcomeSampler {
    d: usize,
    cumulative: Vec<Vec<f64>>,
}

impl OutcomeSampler {
    fn new<T: Scalar>(b: &CorrelationBox<T>) -> Result<Self> {
        let d = require_d2dd(b)?;
        let mut cumulative = Vec::with_capacity(2 * d);
        for x in 0..d {
            for y in 0..2 {
                let mut acc = 0.0;
                let mut row = Vec::with_capacity(d * d);
                for a in 0..d {
                    for bb in 0..d {
                        acc += b.get(a, bb, x, y).to_f64_lossy().max(0.0);
                        row.push(acc);
                    }
                }
                if !(acc > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "no probability mass at x={x}, y={y}"
                    )));
                }
                cumulative.push(row);
            }
        }
        Ok(Self { d, cumulative })
    }

    #[inline]
    fn sample(&self, x: usize, y: usize, rng: &mut impl Rng) -> (usize, usize) {
        let row = &self.cumulative[x * 2 + y];
        let u = rng.gen::<f64>() * row[row.len() - 1];
        let k = row.partition_point(|&c| c <= u).min(row.len() - 1);
        (k / self.d, k % self.d)
    }
}

/// Monte-Carlo tally of the nested game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationTally {
    pub successes: u64,
    pub trials: u64,
}

impl SimulationTally {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Plays the depth-`depth` game `trials` times with every node holding a copy of `resource`.
///
/// Trials are split into fixed-size streams, stream `k` seeded from `(seed, k)`, so the
/// result does not depend on how many worker threads run them.
pub fn simulate_nested_box<T: Scalar>(
    resource: &CorrelationBox<T>,
    depth: u32,
    trials: u64,
    seed: u64,
) -> Result<SimulationTally> {
    if depth == 0 {
        return Err(domain("nesting depth must be at least 1"));
    }
    if depth > MAX_SIMULATION_DEPTH {
        return Err(domain(format!(
            "nesting depth {depth} exceeds the simulation limit {MAX_SIMULATION_DEPTH}"
        )));
    }
    if trials == 0 {
        return Err(domain("at least one trial is required"));
    }
    let sampler = OutcomeSampler::new(resource)?;
    let streams = trials.div_ceil(TRIALS_PER_STREAM);
    let successes = (0..streams)
        .into_par_iter()
        .map(|stream| {
            let start = stream * TRIALS_PER_STREAM;
            let count = TRIALS_PER_STREAM.min(trials - start);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut game = NestedGame::new(sampler.d, depth);
            (0..count).filter(|_| game.play(&sampler, &mut rng)).count() as u64
        })
        .sum();
    Ok(SimulationTally { successes, trials })
}

/// Empirical success rate of the nested game on isotropic boxes.
pub fn simulate_nested<T: Real>(cfg: &ProtocolConfig<T>, trials: u64, seed: u64) -> Result<f64> {
    let resource = make_isotropic(cfg.d, cfg.noise)?;
    Ok(simulate_nested_box(&resource, cfg.depth, trials, seed)?.rate())
}

/// Scratch buffers for one trial.
struct NestedGame {
    d: usize,
    depth: u32,
    dits: Vec<usize>,
    /// `messages[l][k]`: value forwarded by node `k` of level `l`.
    messages: Vec<Vec<usize>>,
    /// `bob[l][k]`: Bob's output at node `k` of level `l`.
    bob: Vec<Vec<usize>>,
}

impl NestedGame {
    fn new(d: usize, depth: u32) -> Self {
        let n = 1usize << depth;
        let levels = depth as usize;
        Self {
            d,
            depth,
            dits: vec![0; n],
            messages: (0..levels).map(|l| vec![0; n >> (l + 1)]).collect(),
            bob: (0..levels).map(|l| vec![0; n >> (l + 1)]).collect(),
        }
    }

    fn play(&mut self, sampler: &OutcomeSampler, rng: &mut impl Rng) -> bool {
        let d = self.d;
        for x in self.dits.iter_mut() {
            *x = rng.gen_range(0..d);
        }
        let target = rng.gen_range(0..self.dits.len());

        for level in 0..self.depth as usize {
            let y = (target >> level) & 1;
            let (lower, upper) = self.messages.split_at_mut(level);
            let children: &[usize] = if level == 0 {
                &self.dits
            } else {
                &lower[level - 1]
            };
            for (k, msg) in upper[0].iter_mut().enumerate() {
                let left = children[2 * k];
                let right = children[2 * k + 1];
                let input = (right + d - left) % d;
                // off-path nodes are sampled too; their b never reaches Bob's guess
                let (a, b) = sampler.sample(input, y, rng);
                *msg = (a + d - left) % d;
                self.bob[level][k] = b;
            }
        }

        let mut guess = self.messages[self.depth as usize - 1][0];
        for level in (0..self.depth as usize).rev() {
            let b = self.bob[level][target >> (level + 1)];
            guess = (b + d - guess) % d;
        }
        guess == self.dits[target]
    }
}

/// `I = Σ_K I(x_K : G | y = K)` by exhaustive enumeration, isotropic boxes.
pub fn exact_information<T: Real>(cfg: &ProtocolConfig<T>) -> Result<T> {
    let resource = make_isotropic(cfg.d, cfg.noise)?;
    exact_information_box(&resource, cfg.depth)
}

/// Number of elementary terms `d^N · d^{2(N−1)}` the enumeration visits per target.
pub fn exact_cost(d: usize, depth: u32) -> f64 {
    let n = 2f64.powi(depth.min(1023) as i32);
    (d as f64).powf(n + 2.0 * (n - 1.0))
}

/// Exact `I` for the nested game with every node holding `resource`.
pub fn exact_information_box<T: Real>(resource: &CorrelationBox<T>, depth: u32) -> Result<T> {
    let d = require_d2dd(resource)?;
    if depth == 0 {
        return Err(domain("nesting depth must be at least 1"));
    }
    let cost = exact_cost(d, depth);
    if !(cost <= EXACT_BUDGET) {
        return Err(Error::Budget {
            required: cost,
            budget: EXACT_BUDGET,
        });
    }
    let n = 1usize << depth;
    let per_target = (0..n)
        .into_par_iter()
        .map(|target| exact_joint(resource, d, depth, target).map(|j| mutual_information(&j)))
        .collect::<Result<Vec<T>>>()?;
    Ok(per_target.into_iter().fold(T::zero(), |acc, i| acc + i))
}

/// Joint distribution of `(x_target, G)` given Bob aims at `target`.
fn exact_joint<T: Real>(
    resource: &CorrelationBox<T>,
    d: usize,
    depth: u32,
    target: usize,
) -> Result<JointDistribution<T>> {
    let n = 1usize << depth;
    let mut table = vec![T::zero(); d * d];
    let mut game = NestedGame::new(d, depth);
    let prior = T::one() / T::from_count(d).powi(n as i32);

    // odometer over Alice's dits
    loop {
        enumerate_nodes(resource, &mut game, target, 0, 0, prior, &mut table);
        let mut i = 0;
        while i < n {
            game.dits[i] += 1;
            if game.dits[i] < d {
                break;
            }
            game.dits[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    // millions of products drift the total by ~1e-11; the exact total is 1
    let total = table.iter().fold(T::zero(), |acc, &q| acc + q);
    for q in table.iter_mut() {
        *q = *q / total;
    }
    JointDistribution::new(d, d, table)
}

/// Depth-first enumeration of every node's outcome pair in bottom-up order.
fn enumerate_nodes<T: Real>(
    resource: &CorrelationBox<T>,
    game: &mut NestedGame,
    target: usize,
    level: usize,
    k: usize,
    weight: T,
    table: &mut [T],
) {
    let d = game.d;
    if level == game.depth as usize {
        let mut guess = game.messages[level - 1][0];
        for l in (0..level).rev() {
            let b = game.bob[l][target >> (l + 1)];
            guess = (b + d - guess) % d;
        }
        let x = game.dits[target];
        table[x * d + guess] = table[x * d + guess] + weight;
        return;
    }
    let (left, right) = if level == 0 {
        (game.dits[2 * k], game.dits[2 * k + 1])
    } else {
        (
            game.messages[level - 1][2 * k],
            game.messages[level - 1][2 * k + 1],
        )
    };
    let input = (right + d - left) % d;
    let y = (target >> level) & 1;
    let (next_level, next_k) = if k + 1 < game.messages[level].len() {
        (level, k + 1)
    } else {
        (level + 1, 0)
    };
    if k != target >> (level + 1) {
        // Bob never reads this box, so only Alice's marginal matters
        for a in 0..d {
            let p = (0..d).fold(T::zero(), |acc, b| acc + resource.get(a, b, input, y));
            if p <= T::zero() {
                continue;
            }
            game.messages[level][k] = (a + d - left) % d;
            enumerate_nodes(
                resource,
                game,
                target,
                next_level,
                next_k,
                weight * p,
                table,
            );
        }
        return;
    }
    for a in 0..d {
        for b in 0..d {
            let p = resource.get(a, b, input, y);
            if p <= T::zero() {
                continue;
            }
            game.messages[level][k] = (a + d - left) % d;
            game.bob[level][k] = b;
            enumerate_nodes(
                resource,
                game,
                target,
                next_level,
                next_k,
                weight * p,
                table,
            );
        }
    }
}

/// Closed-form success, Fano bound and (when requested and affordable) exact `I`.
pub fn evaluate<T: Real>(cfg: &ProtocolConfig<T>, with_exact: bool) -> Result<ProtocolOutcome<T>> {
    let exact_information = if with_exact && exact_cost(cfg.d, cfg.depth) <= EXACT_BUDGET {
        Some(exact_information(cfg)?)
    } else {
        None
    };
    Ok(ProtocolOutcome {
        success_probability: success_prob_closed(cfg),
        exact_information,
        fano_bound: isotropic_fano_bound(cfg.d, cfg.depth, cfg.e()),
    })
}

//! Identification of the reliance thresholds given fitted continuous dynamics.
//!
//! The continuous rollout does not depend on the thresholds, so it is computed
//! once; every candidate threshold vector is then scored by the fraction of
//! samples `k = 1..N` whose predicted reliance matches the observed one.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::active_thresholds;
use crate::model::{
    simulate, AffineParams, Channel, CognitiveState, HybridModel, SimulatedTrajectory, Thresholds,
    Trajectory,
};

/// Box margin added beyond the rollout range on each side.
pub const BOX_MARGIN: f64 = 0.05;
/// Largest grid [`grid_oracle`] will enumerate.
pub const MAX_GRID_POINTS: u64 = 10_000_000;

/// Standard confusion counts over `k = 1..N`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_sequences(truth: &[bool], predicted: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub thresholds: Thresholds,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub active_set: BTreeSet<Channel>,
}

/// Per-channel search interval for the thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl SearchBox {
    pub fn width(&self, ch: usize) -> f64 {
        self.hi[ch] - self.lo[ch]
    }

    /// Thresholds at which no clause can fire.
    pub fn never_engage(&self) -> Thresholds {
        Thresholds::new(self.hi[0], self.lo[1], self.hi[2])
    }

    /// Thresholds at which every clause fires.
    pub fn always_engage(&self) -> Thresholds {
        Thresholds::new(self.lo[0], self.hi[1], self.lo[2])
    }

    fn clamp(&self, ch: usize, v: f64) -> f64 {
        v.clamp(self.lo[ch], self.hi[ch])
    }
}

/// Genetic search settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Mutation standard deviation as a fraction of the box width.
    pub mutation_scale: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub stall_generations: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 120,
            tournament: 3,
            crossover_rate: 0.8,
            mutation_scale: 0.02,
            mutation_rate: 0.15,
            elitism: 2,
            stall_generations: 25,
            seed: 42,
        }
    }
}

impl GaConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Open-loop rollout of the continuous states, cached for threshold scoring.
pub(crate) struct Rollout {
    /// `values[ch][k-1]` is the predicted state of channel `ch` at sample `k`.
    values: [Vec<f64>; 3],
    truth: Vec<bool>,
    /// Sorted distinct values per channel over `k = 0..=N`.
    levels: [Vec<f64>; 3],
    states: Vec<CognitiveState>,
    q0: bool,
}

impl Rollout {
    pub(crate) fn new(traj: &Trajectory, continuous: [AffineParams; 3]) -> Result<Self> {
        let x0 = *traj
            .self_reports()
            .get(&0)
            .ok_or(Error::MissingInitialReport)?;
        let model = HybridModel::new(
            continuous[0],
            continuous[1],
            continuous[2],
            Thresholds::new(0.0, 0.0, 0.0),
        );
        let q0 = traj.reliance()[0];
        let sim = simulate(x0, q0, traj.complexity(), &model)?;
        let values = Channel::ALL.map(|ch| sim.states[1..].iter().map(|s| s.get(ch)).collect());
        let levels = Channel::ALL.map(|ch| {
            let mut v: Vec<f64> = sim.states.iter().map(|s| s.get(ch)).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        });
        Ok(Self {
            values,
            truth: traj.reliance()[1..].to_vec(),
            levels,
            states: sim.states,
            q0,
        })
    }

    pub(crate) fn search_box(&self) -> SearchBox {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for ch in 0..3 {
            lo[ch] = self.levels[ch][0] - BOX_MARGIN;
            hi[ch] = self.levels[ch][self.levels[ch].len() - 1] + BOX_MARGIN;
        }
        SearchBox { lo, hi }
    }

    fn predict(&self, th: &[f64; 3]) -> Vec<bool> {
        (0..self.truth.len())
            .map(|k| {
                self.values[0][k] > th[0] || self.values[1][k] < th[1] || self.values[2][k] > th[2]
            })
            .collect()
    }

    /// Number of correctly predicted samples.
    fn hits(&self, th: &[f64; 3]) -> usize {
        (0..self.truth.len())
            .filter(|&k| {
                let q = self.values[0][k] > th[0]
                    || self.values[1][k] < th[1]
                    || self.values[2][k] > th[2];
                q == self.truth[k]
            })
            .count()
    }

    /// Moves `theta` to the middle of the gap between consecutive rollout
    /// levels that contains it, without changing which samples fire.
    fn center(&self, ch: usize, theta: f64, bx: &SearchBox) -> f64 {
        let levels = &self.levels[ch];
        let channel = Channel::ALL[ch];
        // Levels below `split` sit on one side of theta, the rest on the other.
        let split = if channel.fires_above() {
            levels.partition_point(|&v| v <= theta)
        } else {
            levels.partition_point(|&v| v < theta)
        };
        let below = if split == 0 {
            bx.lo[ch]
        } else {
            levels[split - 1]
        };
        let above = if split == levels.len() {
            bx.hi[ch]
        } else {
            levels[split]
        };
        0.5 * (below + above)
    }

    fn margin(&self, th: &[f64; 3], active: &BTreeSet<Channel>) -> f64 {
        active
            .iter()
            .flat_map(|ch| {
                let i = ch.index();
                self.values[i].iter().map(move |v| (v - th[i]).abs())
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn fit(&self, th: Thresholds) -> ThresholdFit {
        let mut reliance = Vec::with_capacity(self.truth.len() + 1);
        reliance.push(self.q0);
        reliance.extend(self.predict(&th.to_array()));
        let confusion = Confusion::from_sequences(&self.truth, &reliance[1..]);
        let sim = SimulatedTrajectory {
            states: self.states.clone(),
            reliance,
        };
        ThresholdFit {
            thresholds: th,
            accuracy: confusion.accuracy(),
            confusion,
            active_set: active_thresholds(&sim, &th),
        }
    }
}

/// Scores `model` on `traj`: open-loop rollout from the `k = 0` self-report
/// and the observed `q(0)`, compared with `q(k)` for `k = 1..N`.
pub fn rollout_accuracy(traj: &Trajectory, model: &HybridModel) -> Result<ThresholdFit> {
    model.check_finite()?;
    let rollout = Rollout::new(traj, [model.trust, model.risk, model.workload])?;
    Ok(rollout.fit(model.thresholds))
}

/// Searches the thresholds with a genetic algorithm using default settings.
pub fn fit_thresholds(traj: &Trajectory, continuous: [AffineParams; 3]) -> Result<ThresholdFit> {
    fit_thresholds_with(traj, continuous, &GaConfig::default())
}

/// Genetic threshold search followed by a per-coordinate plateau sweep.
///
/// Thresholds that can be moved to a box edge without losing accuracy are
/// moved there. Among the remaining equally accurate candidates the one with
/// the fewest active thresholds wins, then the one whose active thresholds
/// sit farthest from every rollout sample;
/// inactive thresholds are moved to a box edge when that leaves the
/// prediction unchanged.
pub fn fit_thresholds_with(
    traj: &Trajectory,
    continuous: [AffineParams; 3],
    cfg: &GaConfig,
) -> Result<ThresholdFit> {
    for p in &continuous {
        if !p.is_finite() {
            return Err(Error::NonFinite("continuous parameters"));
        }
    }
    let rollout = Rollout::new(traj, continuous)?;
    let bx = rollout.search_box();
    let outcome = genetic_search(&rollout, &bx, cfg);

    let best_hits = outcome.best_hits;
    let mut candidates: Vec<[f64; 3]> = outcome
        .population
        .into_iter()
        .filter(|(_, h)| *h == best_hits)
        .map(|(g, _)| g)
        .collect();
    candidates.push(outcome.polished);
    candidates.extend(subset_candidates(&rollout, &bx, outcome.polished));

    let mut chosen: Option<(usize, ThresholdFit, f64)> = None;
    for genes in candidates {
        let genes = prune_redundant(&rollout, &bx, genes);
        let centered: [f64; 3] = std::array::from_fn(|ch| rollout.center(ch, genes[ch], &bx));
        let hits = rollout.hits(&centered);
        let fit = rollout.fit(Thresholds::from_array(centered));
        let margin = rollout.margin(&centered, &fit.active_set);
        let better = match &chosen {
            None => true,
            Some((cur_hits, cur, cur_margin)) => cur_hits
                .cmp(&hits)
                .then(fit.active_set.len().cmp(&cur.active_set.len()))
                .then(cur_margin.total_cmp(&margin))
                .then(lexicographic(&fit.thresholds, &cur.thresholds))
                .is_lt(),
        };
        if better {
            chosen = Some((hits, fit, margin));
        }
    }
    let (_, fit, _) = chosen.expect("polished candidate always present");
    Ok(canonicalize_inactive(&rollout, &bx, fit))
}

/// Pushes each threshold to a box edge when that costs no accuracy, so
/// channels that do not help explain reliance end up inactive.
fn prune_redundant(rollout: &Rollout, bx: &SearchBox, mut genes: [f64; 3]) -> [f64; 3] {
    let hits = rollout.hits(&genes);
    for ch in Channel::ALL {
        let i = ch.index();
        for edge in [bx.never_engage().get(ch), bx.always_engage().get(ch)] {
            let mut trial = genes;
            trial[i] = edge;
            if rollout.hits(&trial) >= hits {
                genes = trial;
                break;
            }
        }
    }
    genes
}

/// Largest pair grid searched exhaustively by [`pair_sweep`].
const PAIR_SWEEP_LIMIT: usize = 250_000;

/// Refinement candidates restricted to channel subsets: the two constant
/// predictors, the exact optimum of each single channel and of each channel
/// pair (remaining channels never firing, or held at `start`).
fn subset_candidates(rollout: &Rollout, bx: &SearchBox, start: [f64; 3]) -> Vec<[f64; 3]> {
    let never = bx.never_engage().to_array();
    let mut out = vec![never, bx.always_engage().to_array()];
    for c in 0..3 {
        let mut free = [false; 3];
        free[c] = true;
        let mut base = never;
        base[c] = start[c];
        out.push(plateau_sweep_on(rollout, bx, base, free));
    }
    for (c1, c2, fixed) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        for third in [never[fixed], start[fixed]] {
            let mut base = start;
            base[fixed] = third;
            out.push(pair_sweep(rollout, bx, base, c1, c2));
        }
    }
    out
}

/// Midpoints of every gap between consecutive levels, plus both outer gaps.
fn plateau_points(rollout: &Rollout, bx: &SearchBox, ch: usize) -> Vec<f64> {
    let levels = &rollout.levels[ch];
    let mut c = Vec::with_capacity(levels.len() + 1);
    c.push(0.5 * (bx.lo[ch] + levels[0]));
    c.extend(levels.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    c.push(0.5 * (levels[levels.len() - 1] + bx.hi[ch]));
    c
}

/// Exhaustive search over the plateaus of channels `c1` and `c2`, the third
/// held at `base`. Falls back to coordinate ascent on very long rollouts.
fn pair_sweep(rollout: &Rollout, bx: &SearchBox, base: [f64; 3], c1: usize, c2: usize) -> [f64; 3] {
    let p1 = plateau_points(rollout, bx, c1);
    let p2 = plateau_points(rollout, bx, c2);
    if p1.len() * p2.len() > PAIR_SWEEP_LIMIT {
        let mut free = [false; 3];
        free[c1] = true;
        free[c2] = true;
        return plateau_sweep_on(rollout, bx, base, free);
    }
    let n = rollout.truth.len();
    let fires = |ch: usize, th: f64| {
        let channel = Channel::ALL[ch];
        bitset(n, |k| channel.fires(rollout.values[ch][k], th))
    };
    let fixed = 3 - c1 - c2;
    let third = fires(fixed, base[fixed]);
    let truth = bitset(n, |k| rollout.truth[k]);
    let second: Vec<Bits> = p2.iter().map(|&t| fires(c2, t)).collect();
    let mut best = (rollout.hits(&base), base);
    let mut acc = vec![0u64; truth.len()];
    for &t1 in &p1 {
        let first = fires(c1, t1);
        for w in 0..acc.len() {
            acc[w] = first[w] | third[w];
        }
        for (j, f2) in second.iter().enumerate() {
            let miss: u32 = acc
                .iter()
                .zip(f2)
                .zip(&truth)
                .map(|((a, b), t)| ((a | b) ^ t).count_ones())
                .sum();
            let hits = n - miss as usize;
            if hits > best.0 {
                let mut genes = base;
                genes[c1] = t1;
                genes[c2] = p2[j];
                best = (hits, genes);
            }
        }
    }
    best.1
}

fn canonicalize_inactive(rollout: &Rollout, bx: &SearchBox, fit: ThresholdFit) -> ThresholdFit {
    let reference = rollout.predict(&fit.thresholds.to_array());
    let mut th = fit.thresholds;
    for ch in Channel::ALL {
        if fit.active_set.contains(&ch) {
            continue;
        }
        for edge in [bx.never_engage().get(ch), bx.always_engage().get(ch)] {
            let mut trial = th;
            trial.set(ch, edge);
            if rollout.predict(&trial.to_array()) == reference {
                th = trial;
                break;
            }
        }
    }
    rollout.fit(th)
}

/// Ordering used to break ties between equally good threshold vectors:
/// `θ_T` ascending, then `θ_R` descending, then `θ_W` ascending.
pub fn lexicographic(a: &Thresholds, b: &Thresholds) -> Ordering {
    a.trust
        .total_cmp(&b.trust)
        .then(b.risk.total_cmp(&a.risk))
        .then(a.workload.total_cmp(&b.workload))
}

pub(crate) struct GaOutcome {
    pub(crate) population: Vec<([f64; 3], usize)>,
    pub(crate) polished: [f64; 3],
    pub(crate) best_hits: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    /// Best hit count after each generation, starting with the initial population.
    pub(crate) history: Vec<usize>,
}

pub(crate) fn genetic_search(rollout: &Rollout, bx: &SearchBox, cfg: &GaConfig) -> GaOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let pop_size = cfg.population.max(cfg.elitism + 1).max(2);

    let mut population: Vec<[f64; 3]> = vec![
        bx.never_engage().to_array(),
        bx.always_engage().to_array(),
    ];
    while population.len() < pop_size {
        population.push(std::array::from_fn(|ch| {
            if bx.width(ch) > 0.0 {
                rng.gen_range(bx.lo[ch]..=bx.hi[ch])
            } else {
                bx.lo[ch]
            }
        }));
    }

    let score = |pop: &[[f64; 3]]| -> Vec<([f64; 3], usize)> {
        let mut scored: Vec<_> = pop.iter().map(|g| (*g, rollout.hits(g))).collect();
        // Stable sort keeps the ordering deterministic for equal fitness.
        scored.sort_by(|a, b| b.1.cmp(&a.1));
        scored
    };

    let mut scored = score(&population);
    let mut history = vec![scored[0].1];
    let mut stall = 0;

    for _ in 0..cfg.generations {
        let mut next: Vec<[f64; 3]> = scored.iter().take(cfg.elitism).map(|s| s.0).collect();
        while next.len() < pop_size {
            let p1 = tournament(&scored, cfg.tournament, &mut rng);
            let p2 = tournament(&scored, cfg.tournament, &mut rng);
            let mut child = p1;
            if rng.gen::<f64>() < cfg.crossover_rate {
                for ch in 0..3 {
                    if rng.gen::<bool>() {
                        child[ch] = p2[ch];
                    }
                }
            }
            for ch in 0..3 {
                if rng.gen::<f64>() < cfg.mutation_rate {
                    let sigma = cfg.mutation_scale * bx.width(ch);
                    child[ch] = bx.clamp(ch, child[ch] + sigma * unit.sample(&mut rng));
                }
            }
            next.push(child);
        }
        let prev_best = scored[0].1;
        scored = score(&next);
        history.push(scored[0].1);
        if scored[0].1 > prev_best {
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.stall_generations {
                break;
            }
        }
    }

    let polished = plateau_sweep(rollout, bx, scored[0].0);
    let best_hits = rollout.hits(&polished).max(scored[0].1);
    GaOutcome {
        population: scored,
        polished,
        best_hits,
        history,
    }
}

fn tournament(scored: &[([f64; 3], usize)], size: usize, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mut best = rng.gen_range(0..scored.len());
    for _ in 1..size.max(1) {
        let i = rng.gen_range(0..scored.len());
        if scored[i].1 > scored[best].1 {
            best = i;
        }
    }
    scored[best].0
}

/// Coordinate ascent over the plateaus of each threshold: every gap between
/// consecutive rollout levels is tried, one channel at a time.
fn plateau_sweep(rollout: &Rollout, bx: &SearchBox, start: [f64; 3]) -> [f64; 3] {
    plateau_sweep_on(rollout, bx, start, [true; 3])
}

fn plateau_sweep_on(
    rollout: &Rollout,
    bx: &SearchBox,
    start: [f64; 3],
    free: [bool; 3],
) -> [f64; 3] {
    let candidates: [Vec<f64>; 3] = std::array::from_fn(|ch| plateau_points(rollout, bx, ch));
    let mut best = start;
    let mut best_hits = rollout.hits(&best);
    loop {
        let mut improved = false;
        for ch in (0..3).filter(|&c| free[c]) {
            for &v in &candidates[ch] {
                let mut trial = best;
                trial[ch] = v;
                let h = rollout.hits(&trial);
                if h > best_hits {
                    best_hits = h;
                    best = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            return best;
        }
    }
}

/// Exhaustive search over a Cartesian grid with spacing `step`, inside
/// `search` (or the default rollout box).
pub fn grid_oracle(
    traj: &Trajectory,
    continuous: [AffineParams; 3],
    step: f64,
    search: Option<SearchBox>,
) -> Result<ThresholdFit> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidInput(format!("grid step must be positive, got {step}")));
    }
    let rollout = Rollout::new(traj, continuous)?;
    let bx = search.unwrap_or_else(|| rollout.search_box());
    for ch in 0..3 {
        if !(bx.lo[ch].is_finite() && bx.hi[ch].is_finite() && bx.lo[ch] <= bx.hi[ch]) {
            return Err(Error::InvalidInput("search box must be finite and ordered".into()));
        }
    }
    let axes: [Vec<f64>; 3] = std::array::from_fn(|ch| grid_axis(bx.lo[ch], bx.hi[ch], step));
    let total: u64 = axes.iter().map(|a| a.len() as u64).product();
    if total > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge(total));
    }
    let best = grid_search(&rollout, &axes);
    Ok(rollout.fit(best))
}

fn grid_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut axis: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if let Some(&last) = axis.last() {
        if hi - last > 1e-12 * (1.0 + hi.abs()) {
            axis.push(hi);
        }
    }
    axis
}

type Bits = Vec<u64>;

fn bitset(n: usize, pred: impl Fn(usize) -> bool) -> Bits {
    let mut bits = vec![0u64; n.div_ceil(64)];
    for k in 0..n {
        if pred(k) {
            bits[k / 64] |= 1 << (k % 64);
        }
    }
    bits
}

/// Best grid point, independent of the order in which axis values are listed.
pub(crate) fn grid_search(rollout: &Rollout, axes: &[Vec<f64>; 3]) -> Thresholds {
    let n = rollout.truth.len();
    let truth = bitset(n, |k| rollout.truth[k]);
    let fired: [Vec<Bits>; 3] = std::array::from_fn(|ch| {
        let channel = Channel::ALL[ch];
        axes[ch]
            .iter()
            .map(|&th| bitset(n, |k| channel.fires(rollout.values[ch][k], th)))
            .collect()
    });
    let mut best: Option<(usize, Thresholds)> = None;
    let mut tr = vec![0u64; truth.len()];
    for (i, ft) in fired[0].iter().enumerate() {
        for (j, fr) in fired[1].iter().enumerate() {
            for w in 0..tr.len() {
                tr[w] = ft[w] | fr[w];
            }
            for (l, fw) in fired[2].iter().enumerate() {
                let mismatches: u32 = tr
                    .iter()
                    .zip(fw)
                    .zip(&truth)
                    .map(|((a, b), t)| ((a | b) ^ t).count_ones())
                    .sum();
                let hits = n - mismatches as usize;
                let cand = Thresholds::new(axes[0][i], axes[1][j], axes[2][l]);
                let better = match &best {
                    None => true,
                    Some((h, cur)) => {
                        hits > *h || (hits == *h && lexicographic(&cand, cur) == Ordering::Less)
                    }
                };
                if better {
                    best = Some((hits, cand));
                }
            }
        }
    }
    best.expect("non-empty grid").1
}

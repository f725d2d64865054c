//! Exact enumeration of the outcome tree, seeded Monte Carlo sampling and
//! aggregated reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::channel::{self, ChannelParams, InputState, ParamError};
use crate::povm::{self, PovmValidation};
use crate::protocol::{self, BellOutcome, Classification, PovmOutcome, ProtocolError, StepOutcomes, Transcript};
use crate::qsim::{DensityMatrix, EQ_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("at least one Monte Carlo trial is required")]
    ZeroTrials,
    #[error("sweep point {index} is invalid: {source}")]
    SweepPoint { index: usize, source: ParamError },
    #[error("invalid sweep specification: {0}")]
    SweepSpec(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// One leaf of the outcome tree.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRow {
    pub outcomes: StepOutcomes,
    pub probability: f64,
    pub classification: Classification,
    pub fidelity: Option<f64>,
    pub final_state: Option<DensityMatrix>,
    pub transcript: Transcript,
}

impl BranchRow {
    /// Zero-probability leaves are kept so that tables have a fixed shape.
    pub fn reachable(&self) -> bool {
        self.probability > 0.0
    }
}

/// All 16 leaves in [`StepOutcomes::all`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    pub rows: Vec<BranchRow>,
}

impl BranchTable {
    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.probability).sum()
    }

    pub fn total_for(&self, class: Classification) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.classification == class)
            .map(|r| r.probability)
            .sum()
    }

    /// Lowest fidelity over reachable Success leaves, if any exist.
    pub fn min_success_fidelity(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.fidelity)
            .fold(None, |acc, f| Some(acc.map_or(f, |m: f64| m.min(f))))
    }
}

/// Exact conditional distributions along the outcome tree, plus its leaves.
#[derive(Debug, Clone)]
pub struct OutcomeTree {
    bell: [f64; 4],
    vonneumann: [[f64; 2]; 4],
    povm: [[f64; 3]; 4],
    table: BranchTable,
}

impl OutcomeTree {
    pub fn build(p: &ChannelParams, input: &InputState) -> Result<Self> {
        let d = povm::derive_params(p);
        let composite = channel::build_composite(p, input);
        let mut bell = [0.0; 4];
        let mut vonneumann = [[1.0, 0.0]; 4];
        let mut povm_cond = [[0.0, 0.0, 1.0]; 4];
        let mut rows = Vec::with_capacity(16);

        for (bi, branch) in protocol::alice_bell_measure(&composite)?.into_iter().enumerate() {
            bell[bi] = branch.probability;
            let [vn0, vn1] = protocol::bob_vonneumann(&branch.state)?;
            if branch.probability > 0.0 {
                vonneumann[bi] = [
                    vn0.probability / branch.probability,
                    vn1.probability / branch.probability,
                ];
            }

            let povm_leaves = if vn0.probability > 0.0 {
                let register = protocol::bob_attach_and_cnot(&vn0, branch.outcome)?;
                Some(protocol::alice_povm(&register, branch.outcome, &d)?)
            } else {
                None
            };
            for outcome in PovmOutcome::ALL {
                let path = StepOutcomes::new(branch.outcome, 0, Some(outcome))?;
                let mut row = BranchRow {
                    outcomes: path,
                    probability: 0.0,
                    classification: path.classification(),
                    fidelity: None,
                    final_state: None,
                    transcript: Transcript::for_outcomes(&path),
                };
                if let Some(leaves) = &povm_leaves {
                    let (_, conditional, collapsed) = &leaves[outcome.index()];
                    povm_cond[bi][outcome.index()] = *conditional;
                    row.probability = vn0.probability * conditional;
                    if row.classification == Classification::Success {
                        match collapsed {
                            Some(state) => {
                                let (rho, fid) = protocol::finish_success(state, branch.outcome, outcome, input)?;
                                row.final_state = Some(rho);
                                row.fidelity = Some(fid);
                            }
                            None => row.probability = 0.0,
                        }
                    }
                }
                rows.push(row);
            }
            let failed = StepOutcomes::new(branch.outcome, 1, None)?;
            rows.push(BranchRow {
                outcomes: failed,
                probability: vn1.probability,
                classification: Classification::FailVonNeumann,
                fidelity: None,
                final_state: None,
                transcript: Transcript::for_outcomes(&failed),
            });
        }

        Ok(Self {
            bell,
            vonneumann,
            povm: povm_cond,
            table: BranchTable { rows },
        })
    }

    pub fn table(&self) -> &BranchTable {
        &self.table
    }

    pub fn into_table(self) -> BranchTable {
        self.table
    }

    /// Draws one outcome path by successive inverse-CDF sampling of the
    /// Bell, von Neumann and POVM conditionals.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> StepOutcomes {
        let bi = inverse_cdf(&self.bell, rng.random());
        let bell = BellOutcome::ALL[bi];
        let vn = inverse_cdf(&self.vonneumann[bi], rng.random());
        let povm = (vn == 0).then(|| PovmOutcome::ALL[inverse_cdf(&self.povm[bi], rng.random())]);
        StepOutcomes::new(bell, vn as u8, povm).expect("consistent by construction")
    }
}

/// Index of the first bucket whose cumulative weight exceeds `u`; rounding
/// slack at the top end goes to the last bucket of nonzero weight.
fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

pub fn enumerate(p: &ChannelParams, input: &InputState) -> Result<BranchTable> {
    Ok(OutcomeTree::build(p, input)?.into_table())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McStats {
    pub trials: u64,
    pub seed: u64,
    pub successes: u64,
    pub fail_vonneumann: u64,
    pub fail_inconclusive: u64,
    pub p_hat: f64,
    pub std_err: f64,
}

impl McStats {
    fn from_counts(trials: u64, seed: u64, counts: [u64; 3]) -> Self {
        let p_hat = counts[0] as f64 / trials as f64;
        Self {
            trials,
            seed,
            successes: counts[0],
            fail_vonneumann: counts[1],
            fail_inconclusive: counts[2],
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        }
    }

    /// `|p̂ − expected| ≤ k·σ̂`.
    pub fn within_sigma(&self, expected: f64, k: f64) -> bool {
        (self.p_hat - expected).abs() <= k * self.std_err
    }
}

/// Generator for trial `index`: ChaCha8 keyed by `seed`, one stream per trial.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn class_slot(c: Classification) -> usize {
    match c {
        Classification::Success => 0,
        Classification::FailVonNeumann => 1,
        Classification::FailInconclusive => 2,
    }
}

/// Monte Carlo estimate of the success probability. The result depends only
/// on `(seed, trials)`, not on how trials are scheduled across threads.
pub fn sample(p: &ChannelParams, input: &InputState, trials: u64, seed: u64) -> Result<McStats> {
    if trials == 0 {
        return Err(AnalysisError::ZeroTrials);
    }
    let tree = OutcomeTree::build(p, input)?;
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || [0u64; 3],
            |mut acc, i| {
                let path = tree.draw(&mut trial_rng(seed, i));
                acc[class_slot(path.classification())] += 1;
                acc
            },
        )
        .reduce(|| [0u64; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    Ok(McStats::from_counts(trials, seed, counts))
}

/// Serial reference for [`sample`].
pub fn sample_serial(p: &ChannelParams, input: &InputState, trials: u64, seed: u64) -> Result<McStats> {
    if trials == 0 {
        return Err(AnalysisError::ZeroTrials);
    }
    let tree = OutcomeTree::build(p, input)?;
    let mut counts = [0u64; 3];
    for i in 0..trials {
        counts[class_slot(tree.draw(&mut trial_rng(seed, i)).classification())] += 1;
    }
    Ok(McStats::from_counts(trials, seed, counts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub channel: ChannelParams,
    pub input: InputState,
    pub p_success_exact: f64,
    pub p_success_formula: f64,
    pub p_fail_vonneumann_exact: f64,
    pub p_fail_inconclusive_exact: f64,
    pub branch_table: BranchTable,
    pub mc: Option<McStats>,
    pub povm_a: PovmValidation,
    pub povm_b: PovmValidation,
    pub min_success_fidelity: Option<f64>,
}

impl ProtocolReport {
    /// Descriptions of every failed verification check; empty when all pass.
    ///
    /// A Monte Carlo estimate outside 3σ is reported through
    /// [`McStats::within_sigma`] but is not a verification failure.
    pub fn failed_checks(&self) -> Vec<String> {
        let mut failed = Vec::new();
        let (a, b, c) = (self.channel.a(), self.channel.b(), self.channel.c());
        let mut close = |name: &str, got: f64, want: f64| {
            if (got - want).abs() > EQ_TOL || !got.is_finite() {
                failed.push(format!("{name}: {got} differs from {want}"));
            }
        };
        close("p_success_exact vs 2b^2", self.p_success_exact, self.p_success_formula);
        close("p_fail_vonneumann vs c^2", self.p_fail_vonneumann_exact, c * c);
        close(
            "p_fail_inconclusive vs a^2 - b^2",
            self.p_fail_inconclusive_exact,
            a * a - b * b,
        );
        close(
            "total probability",
            self.p_success_exact + self.p_fail_vonneumann_exact + self.p_fail_inconclusive_exact,
            1.0,
        );
        if let Some(f) = self.min_success_fidelity {
            if f.is_nan() || f < 1.0 - EQ_TOL {
                failed.push(format!("min success fidelity {f} below 1 - 1e-12"));
            }
        }
        if self
            .branch_table
            .rows
            .iter()
            .any(|r| r.probability.is_nan() || r.probability < -EQ_TOL)
        {
            failed.push("negative branch probability".into());
        }
        if let Some(row) = self
            .branch_table
            .rows
            .iter()
            .find(|r| r.classification == Classification::Success && r.reachable() && r.fidelity.is_none())
        {
            failed.push(format!("success leaf {:?} has no fidelity", row.outcomes));
        }
        for (name, v) in [("set_a", &self.povm_a), ("set_b", &self.povm_b)] {
            if !v.passed {
                failed.push(format!("POVM {name} failed validation"));
            }
        }
        failed
    }

    pub fn passed(&self) -> bool {
        self.failed_checks().is_empty()
    }
}

/// Enumeration plus optional Monte Carlo (`(trials, seed)`) and POVM validation.
pub fn report(p: &ChannelParams, input: &InputState, mc: Option<(u64, u64)>) -> Result<ProtocolReport> {
    let table = enumerate(p, input)?;
    let d = povm::derive_params(p);
    let mc = match mc {
        Some((trials, seed)) => Some(sample(p, input, trials, seed)?),
        None => None,
    };
    Ok(ProtocolReport {
        channel: *p,
        input: *input,
        p_success_exact: table.total_for(Classification::Success),
        p_success_formula: 2.0 * p.b() * p.b(),
        p_fail_vonneumann_exact: table.total_for(Classification::FailVonNeumann),
        p_fail_inconclusive_exact: table.total_for(Classification::FailInconclusive),
        min_success_fidelity: table.min_success_fidelity(),
        branch_table: table,
        mc,
        povm_a: povm::validate(&povm::build_set_a(&d)),
        povm_b: povm::validate(&povm::build_set_b(&d)),
    })
}

/// One report per grid point `(a, b, c)`. Every point is validated before any
/// work starts; the first invalid one aborts with its index.
pub fn sweep(grid: &[[f64; 3]], input: &InputState) -> Result<Vec<ProtocolReport>> {
    let params = grid
        .iter()
        .enumerate()
        .map(|(index, &[a, b, c])| {
            ChannelParams::new(a, b, c).map_err(|source| AnalysisError::SweepPoint { index, source })
        })
        .collect::<Result<Vec<_>>>()?;
    params.par_iter().map(|p| report(p, input, None)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    A,
    B,
    C,
}

impl SweepParam {
    fn slot(self) -> usize {
        self as usize
    }
}

/// Linear grid over one channel amplitude; the other two are rescaled to keep
/// unit norm while preserving their ratio. Written `param:start:stop:steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }

    /// Grid points derived from `base = [a, b, c]`.
    pub fn grid(&self, base: [f64; 3]) -> Result<Vec<[f64; 3]>> {
        let k = self.param.slot();
        let others: Vec<usize> = (0..3).filter(|&i| i != k).collect();
        let scale = base[others[0]].hypot(base[others[1]]);
        self.values()
            .into_iter()
            .map(|v| {
                if !(0.0..=1.0).contains(&v) {
                    return Err(AnalysisError::SweepSpec(format!("swept value {v} outside [0, 1]")));
                }
                let rest = (1.0 - v * v).max(0.0).sqrt();
                let mut point = [0.0; 3];
                point[k] = v;
                if rest > 0.0 {
                    if scale == 0.0 {
                        return Err(AnalysisError::SweepSpec(
                            "the two unswept parameters are both zero and cannot be rescaled".into(),
                        ));
                    }
                    for &o in &others {
                        point[o] = base[o] / scale * rest;
                    }
                }
                Ok(point)
            })
            .collect()
    }
}

impl FromStr for SweepSpec {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| AnalysisError::SweepSpec(format!("`{s}`: {why} (expected param:start:stop:steps)"));
        let parts: Vec<&str> = s.split(':').collect();
        let [param, start, stop, steps] = parts.as_slice() else {
            return Err(bad("wrong number of fields"));
        };
        let param = match param.trim() {
            "a" => SweepParam::A,
            "b" => SweepParam::B,
            "c" => SweepParam::C,
            _ => return Err(bad("parameter must be a, b or c")),
        };
        let num = |x: &str| x.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        let (Some(start), Some(stop)) = (num(start), num(stop)) else {
            return Err(bad("start and stop must be finite numbers"));
        };
        let steps = steps
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| bad("steps must be a positive integer"))?;
        Ok(Self {
            param,
            start,
            stop,
            steps,
        })
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.param {
            SweepParam::A => "a",
            SweepParam::B => "b",
            SweepParam::C => "c",
        };
        write!(f, "{p}:{}:{}:{}", self.start, self.stop, self.steps)
    }
}

//! Sampled runs of the unknown-parameter protocol.
//!
//! Trials are split into fixed-size chunks. Chunk `i` draws from a ChaCha8
//! stream keyed by `(seed, i)`, so a run depends only on the seed and chunk
//! size, not on how many threads execute it.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::classify::{classify_in_branch, ClassTag, OutcomeClass};
use super::feedforward::{entries_for, measure_with, FeedForwardEntry, FourierOutcome};
use super::{build_initial, enumerate_branches, evolve_probes, homodyne_select, BranchInfo};
use crate::error::{Error, Result};
use crate::format::{csv_f64, F17};
use crate::homodyne::{decision_probability, discriminate, x_distribution, HomodyneModel, ProbePhasePair};
use crate::linalg::CMatrix;
use crate::state::{fidelity, fourier_matrix, PureState, SchmidtTriple};

/// How the two probe readings are turned into a branch label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    /// The branch is read without error (the large-amplitude limit).
    Ideal,
    /// Each probe gives a Gaussian X reading decoded by nearest mean.
    Homodyne { first: HomodyneModel, second: HomodyneModel },
}

/// Probe-1 multiples up to sign; the X quadrature cannot tell `p` from `-p`.
const FIRST_CANDIDATES: [i32; 6] = [0, 1, 2, 3, 4, 6];
const SECOND_CANDIDATES: [i32; 7] = [0, 1, 2, 3, 4, 5, 6];

struct BranchData {
    info: BranchInfo,
    /// Normalized residual on `(a, b)` for each of the 81 outcomes.
    residuals: Vec<Option<PureState>>,
    outcomes: Option<WeightedIndex<f64>>,
    table: Vec<FeedForwardEntry>,
}

/// Precomputed branch and outcome distributions for one input triple.
pub struct Protocol {
    coeffs: SchmidtTriple,
    detection: Detection,
    branches: Vec<BranchData>,
    picker: WeightedIndex<f64>,
}

/// One sampled run of the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Branch actually taken.
    pub branch: ProbePhasePair,
    /// Branch the probe readings pointed to; `None` when they match no branch.
    pub decoded: Option<ProbePhasePair>,
    pub outcome: FourierOutcome,
    pub homodyne_misread: bool,
    /// Normalized `(a, b)` state after the correction.
    pub final_state: PureState,
    /// Class of the state actually produced.
    pub final_class: OutcomeClass,
    /// Class the receiver believes it holds.
    pub believed_class: OutcomeClass,
    /// Overlap with the state the applied correction was meant to produce.
    pub fidelity: f64,
}

/// Row of the `run` CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub branch: ProbePhasePair,
    pub outcome: FourierOutcome,
    pub misread: bool,
    pub class: OutcomeClass,
    pub fidelity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloConfig {
    pub trials: u64,
    pub seed: u64,
    pub chunk_size: u64,
    /// Worker threads, 0 for the rayon default.
    pub threads: usize,
}

impl MonteCarloConfig {
    pub const DEFAULT_CHUNK: u64 = 4096;

    pub fn new(trials: u64, seed: u64) -> Self {
        Self { trials, seed, chunk_size: Self::DEFAULT_CHUNK, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub trials: u64,
    pub class_counts: BTreeMap<ClassTag, u64>,
    pub misreads: u64,
    pub misread_rate: f64,
    /// Mean of [`TrialResult::fidelity`], `None` for an empty run.
    pub mean_fidelity: Option<f64>,
    pub predicted_misread_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub summary: MonteCarloSummary,
    pub records: Vec<TrialRecord>,
}

impl Protocol {
    /// Ideal Fourier detection.
    pub fn new(coeffs: &SchmidtTriple, detection: Detection) -> Result<Self> {
        Self::with_measurement(coeffs, detection, fourier_matrix().matrix())
    }

    /// `meas` row `k` gives the amplitude of click `k` on each of `c, e, d, f`.
    /// Corrections are still looked up from the ideal tables.
    pub fn with_measurement(coeffs: &SchmidtTriple, detection: Detection, meas: &CMatrix) -> Result<Self> {
        if meas.nrows() != 3 || meas.ncols() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: meas.nrows().max(meas.ncols()) });
        }
        if let Detection::Homodyne { first, second } = &detection {
            first.validate()?;
            second.validate()?;
        }
        let infos = enumerate_branches(coeffs)?;
        let template = evolve_probes(&build_initial(&SchmidtTriple::balanced()))?;
        let evolved = evolve_probes(&build_initial(coeffs))?;
        let mut branches = Vec::with_capacity(infos.len());
        for info in infos {
            let (tstate, _) = homodyne_select(&template, info.pair)?;
            let table = entries_for(info.pair, &tstate, info.class)?;
            let (residuals, outcomes) = if info.probability > 0.0 {
                let (state, _) = homodyne_select(&evolved, info.pair)?;
                let mut res = Vec::with_capacity(81);
                let mut weights = Vec::with_capacity(81);
                for o in FourierOutcome::all() {
                    let (r, p) = measure_with(&state, &o, meas)?;
                    weights.push(p);
                    res.push(if p > 0.0 { Some(r.normalize()?) } else { None });
                }
                let w = WeightedIndex::new(weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                (res, Some(w))
            } else {
                (vec![None; 81], None)
            };
            branches.push(BranchData { info, residuals, outcomes, table });
        }
        let picker = WeightedIndex::new(branches.iter().map(|b| b.info.probability))
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Self { coeffs: *coeffs, detection, branches, picker })
    }

    pub fn coeffs(&self) -> &SchmidtTriple {
        &self.coeffs
    }

    pub fn branches(&self) -> impl Iterator<Item = &BranchInfo> {
        self.branches.iter().map(|b| &b.info)
    }

    /// Feed-forward table of branch `pair`, if it exists.
    pub fn table(&self, pair: ProbePhasePair) -> Option<&[FeedForwardEntry]> {
        self.index_of(pair).map(|i| self.branches[i].table.as_slice())
    }

    fn index_of(&self, pair: ProbePhasePair) -> Option<usize> {
        self.branches.iter().position(|b| b.info.pair == pair)
    }

    fn decode<R: Rng + ?Sized>(&self, truth: ProbePhasePair, rng: &mut R) -> Option<usize> {
        match &self.detection {
            Detection::Ideal => self.index_of(truth),
            Detection::Homodyne { first, second } => {
                let x1 = x_distribution(first, truth.p.abs()).sample(rng);
                let x2 = x_distribution(second, truth.q).sample(rng);
                let p = discriminate(first, x1, &FIRST_CANDIDATES).expect("non-empty candidates");
                let q = discriminate(second, x2, &SECOND_CANDIDATES).expect("non-empty candidates");
                self.branches.iter().position(|b| b.info.pair.p.abs() == p && b.info.pair.q == q)
            }
        }
    }

    /// Runs one trial.
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialResult {
        let bi = self.picker.sample(rng);
        let branch = &self.branches[bi];
        let decoded = self.decode(branch.info.pair, rng);
        let oi = branch.outcomes.as_ref().expect("sampled branches have outcomes").sample(rng);
        let outcome = FourierOutcome::from_index(oi as u8);
        let residual = branch.residuals[oi].clone().expect("sampled outcome is possible");
        let (final_state, believed_class, fid) = match decoded {
            Some(d) => {
                let entry = &self.branches[d].table[oi];
                let corrected = residual.apply("a", &entry.correction.matrix()).expect("register a present");
                let f = entry.target.as_ref().and_then(|t| fidelity(&corrected, t).ok()).unwrap_or(0.0);
                (corrected, entry.final_class, f)
            }
            None => (residual, OutcomeClass::UNCLASSIFIABLE, 0.0),
        };
        TrialResult {
            branch: branch.info.pair,
            decoded: decoded.map(|d| self.branches[d].info.pair),
            outcome,
            homodyne_misread: decoded != Some(bi),
            final_class: classify_in_branch(&final_state, branch.info.class),
            final_state,
            believed_class,
            fidelity: fid,
        }
    }

    /// Exact probability that the probe readings point to the wrong branch or none.
    pub fn predicted_misread_rate(&self) -> f64 {
        let Detection::Homodyne { first, second } = &self.detection else {
            return 0.0;
        };
        let ok: f64 = self
            .branches
            .iter()
            .map(|b| {
                let pair = b.info.pair;
                let p1 = decision_probability(first, pair.p.abs(), pair.p.abs(), &FIRST_CANDIDATES).unwrap_or(0.0);
                let p2 = decision_probability(second, pair.q, pair.q, &SECOND_CANDIDATES).unwrap_or(0.0);
                b.info.probability * p1 * p2
            })
            .sum();
        (1.0 - ok).max(0.0)
    }

    /// Runs `cfg.trials` trials; records are kept when `keep_records` is set.
    pub fn run(&self, cfg: &MonteCarloConfig, keep_records: bool) -> Result<MonteCarloRun> {
        if cfg.chunk_size == 0 {
            return Err(Error::InvalidParameter("chunk size must be positive".into()));
        }
        let chunks = cfg.trials.div_ceil(cfg.chunk_size);
        let work = |c: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c);
            let start = c * cfg.chunk_size;
            let end = (start + cfg.chunk_size).min(cfg.trials);
            let mut acc = Partial::default();
            for t in start..end {
                let r = self.trial(&mut rng);
                acc.add(&r);
                if keep_records {
                    acc.records.push(TrialRecord {
                        trial: t,
                        branch: r.branch,
                        outcome: r.outcome,
                        misread: r.homodyne_misread,
                        class: r.final_class,
                        fidelity: r.fidelity,
                    });
                }
            }
            acc
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let parts: Vec<Partial> = pool.install(|| (0..chunks).into_par_iter().map(work).collect());
        let mut total = Partial::default();
        for p in parts {
            total.merge(p);
        }
        let n = cfg.trials;
        Ok(MonteCarloRun {
            summary: MonteCarloSummary {
                trials: n,
                class_counts: total.counts,
                misreads: total.misreads,
                misread_rate: if n == 0 { 0.0 } else { total.misreads as f64 / n as f64 },
                mean_fidelity: (n > 0).then(|| total.fidelity / n as f64),
                predicted_misread_rate: self.predicted_misread_rate(),
            },
            records: total.records,
        })
    }
}

#[derive(Default)]
struct Partial {
    counts: BTreeMap<ClassTag, u64>,
    misreads: u64,
    fidelity: f64,
    records: Vec<TrialRecord>,
}

impl Partial {
    fn add(&mut self, r: &TrialResult) {
        *self.counts.entry(r.final_class.tag).or_insert(0) += 1;
        self.misreads += r.homodyne_misread as u64;
        self.fidelity += r.fidelity;
    }

    fn merge(&mut self, other: Partial) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self.misreads += other.misreads;
        self.fidelity += other.fidelity;
        self.records.extend(other.records);
    }
}

/// One trial with a freshly built [`Protocol`]. Prefer building the protocol
/// once when running many trials.
pub fn run_trial<R: Rng + ?Sized>(coeffs: &SchmidtTriple, detection: Detection, rng: &mut R) -> Result<TrialResult> {
    Ok(Protocol::new(coeffs, detection)?.trial(rng))
}

pub fn run_monte_carlo(
    coeffs: &SchmidtTriple,
    detection: Detection,
    cfg: &MonteCarloConfig,
) -> Result<MonteCarloSummary> {
    Ok(Protocol::new(coeffs, detection)?.run(cfg, false)?.summary)
}

pub fn predicted_misread_rate(coeffs: &SchmidtTriple, detection: Detection) -> Result<f64> {
    Ok(Protocol::new(coeffs, detection)?.predicted_misread_rate())
}

/// CSV with header `trial,branch_p,branch_q,k,l,m,n,misread,class,fidelity`.
pub fn run_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial,branch_p,branch_q,k,l,m,n,misread,class,fidelity\n");
    for r in records {
        let o = r.outcome;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.branch.p,
            r.branch.q,
            o.k,
            o.l,
            o.m,
            o.n,
            r.misread,
            r.class.tag.name(),
            csv_f64(r.fidelity)
        ));
    }
    out
}

#[derive(Serialize)]
struct SummaryJson {
    trials: u64,
    class_counts: BTreeMap<&'static str, u64>,
    misreads: u64,
    misread_rate: F17,
    predicted_misread_rate: F17,
    mean_fidelity: Option<F17>,
}

impl MonteCarloSummary {
    /// Pretty JSON; every class appears in `class_counts`, zeros included.
    pub fn to_json(&self) -> String {
        let class_counts = ClassTag::ALL
            .into_iter()
            .chain([ClassTag::Unclassifiable])
            .map(|t| (t.name(), self.class_counts.get(&t).copied().unwrap_or(0)))
            .collect();
        let s = SummaryJson {
            trials: self.trials,
            class_counts,
            misreads: self.misreads,
            misread_rate: F17(self.misread_rate),
            predicted_misread_rate: F17(self.predicted_misread_rate),
            mean_fidelity: self.mean_fidelity.map(F17),
        };
        serde_json::to_string_pretty(&s).expect("summary serializes")
    }

    pub fn count(&self, tag: ClassTag) -> u64 {
        self.class_counts.get(&tag).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::QuadratureConvention;
    use crate::linalg::C64;

    fn three_sigma(count: u64, n: u64, p: f64) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        (count as f64 / n as f64 - p).abs() <= 3.0 * sigma
    }

    #[test]
    fn product_input_always_product() {
        let p = Protocol::new(&SchmidtTriple::from_real(1.0, 0.0, 0.0).unwrap(), Detection::Ideal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r = p.trial(&mut rng);
            assert_eq!(r.final_class.tag, ClassTag::Product0);
            assert!(!r.homodyne_misread);
            assert!((r.fidelity - 1.0).abs() < 1e-12);
            assert!(r.final_state.is_normalized());
        }
    }

    #[test]
    fn ideal_detection_gives_unit_fidelity() {
        let t = SchmidtTriple::normalized(C64::new(0.6, 0.2), C64::new(0.5, -0.1), C64::new(0.3, 0.4)).unwrap();
        let p = Protocol::new(&t, Detection::Ideal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let r = p.trial(&mut rng);
            assert!(r.fidelity > 1.0 - 1e-10, "{r:?}");
            assert_eq!(r.final_class, r.believed_class);
        }
    }

    #[test]
    fn maximal_frequency_balanced() {
        let cfg = MonteCarloConfig::new(20_000, 7);
        let s = run_monte_carlo(&SchmidtTriple::balanced(), Detection::Ideal, &cfg).unwrap();
        assert_eq!(s.class_counts.values().sum::<u64>(), 20_000);
        assert!(three_sigma(s.count(ClassTag::Maximal), 20_000, 2.0 / 9.0));
        assert_eq!(s.misreads, 0);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let p = Protocol::new(&SchmidtTriple::balanced(), Detection::Ideal).unwrap();
        let mut cfg = MonteCarloConfig::new(3000, 99);
        cfg.chunk_size = 256;
        cfg.threads = 1;
        let a = p.run(&cfg, true).unwrap();
        cfg.threads = 4;
        let b = p.run(&cfg, true).unwrap();
        assert_eq!(run_csv(&a.records), run_csv(&b.records));
        assert_eq!(a.summary, b.summary);
        cfg.seed = 100;
        assert_ne!(run_csv(&p.run(&cfg, true).unwrap().records), run_csv(&a.records));
    }

    #[test]
    fn empty_run() {
        let p = Protocol::new(&SchmidtTriple::balanced(), Detection::Ideal).unwrap();
        let r = p.run(&MonteCarloConfig::new(0, 1), true).unwrap();
        assert_eq!(r.summary.trials, 0);
        assert!(r.records.is_empty());
        assert_eq!(r.summary.mean_fidelity, None);
        assert_eq!(run_csv(&r.records), "trial,branch_p,branch_q,k,l,m,n,misread,class,fidelity\n");
        let v: serde_json::Value = serde_json::from_str(&r.summary.to_json()).unwrap();
        assert_eq!(v["class_counts"]["MAXIMAL"], 0);
        assert!(v["mean_fidelity"].is_null());
    }

    #[test]
    fn weak_probe_misreads_match_prediction() {
        let m = HomodyneModel::new(4.0, 0.35, 0.0, QuadratureConvention::AppendixSqrt2).unwrap();
        let det = Detection::Homodyne { first: m, second: m };
        let p = Protocol::new(&SchmidtTriple::balanced(), det).unwrap();
        let predicted = p.predicted_misread_rate();
        assert!(predicted > 0.05 && predicted < 0.95, "{predicted}");
        let s = p.run(&MonteCarloConfig::new(40_000, 5), false).unwrap().summary;
        assert!(three_sigma(s.misreads, s.trials, predicted), "{} vs {predicted}", s.misread_rate);
        assert!(s.mean_fidelity.unwrap() < 1.0);
    }

    #[test]
    fn run_trial_free_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = run_trial(&SchmidtTriple::balanced(), Detection::Ideal, &mut rng).unwrap();
        assert!(r.final_state.is_normalized());
    }
}

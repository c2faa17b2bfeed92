//! Likelihood-free calibration of the dynamics parameters against an
//! observed behaviour series: plain rejection ABC and a sequential
//! importance-resampling sampler (ABC-SMC) with a Gaussian perturbation
//! kernel.
//!
//! Determinism contract: every random decision flows from `base_seed`.
//! Parameter draws, ancestor picks, and kernel perturbations are consumed
//! sequentially from phase-keyed streams; simulations are seeded by proposal
//! index, so parallel scheduling cannot change the result of the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behaviour::{ModelParams, PARAM_NAMES};
use crate::data::DailySeries;
use crate::engine::{
    observable_transform, quantile_type7, run_ensemble, run_simulation, Channel, SummaryBands,
};
use crate::error::{Error, Result};
use crate::network::SocialNetwork;

use std::io::Write;
use std::path::Path;

/// Inclusive uniform range for one parameter; `lo == hi` pins it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        ParamRange { lo, hi }
    }

    pub fn pinned(v: f64) -> Self {
        ParamRange { lo: v, hi: v }
    }

    pub fn is_pinned(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Independent uniform priors over the 12 parameters, in `PARAM_NAMES` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub ranges: [ParamRange; 12],
}

impl Default for PriorSpec {
    /// Wide defaults: U(0, 0.5) on all rates and couplings, U(0, 0.05) on the
    /// noise scale, initial states pinned at 0.01.
    fn default() -> Self {
        let mut ranges = [ParamRange::new(0.0, 0.5); 12];
        ranges[8] = ParamRange::new(0.0, 0.05); // sigma
        ranges[9] = ParamRange::pinned(0.01); // init_p
        ranges[10] = ParamRange::pinned(0.01); // init_e
        ranges[11] = ParamRange::pinned(0.01); // init_b
        PriorSpec { ranges }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.ranges.iter().enumerate() {
            if !r.lo.is_finite() || !r.hi.is_finite() || r.lo > r.hi {
                return Err(Error::Calibration(format!(
                    "prior for {} has invalid range {}..{}",
                    PARAM_NAMES[i], r.lo, r.hi
                )));
            }
        }
        // Corner checks: interval bounds must satisfy the parameter domain.
        let lows = ModelParams::from_array(std::array::from_fn(|i| self.ranges[i].lo));
        let highs = ModelParams::from_array(std::array::from_fn(|i| self.ranges[i].hi));
        lows.validate()?;
        highs.validate()?;
        Ok(())
    }

    /// One uniform draw per parameter. Pinned parameters still consume a
    /// draw so the stream position never depends on the prior's shape.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> ModelParams {
        ModelParams::from_array(std::array::from_fn(|i| {
            let r = self.ranges[i];
            let u: f64 = rng.random();
            r.lo + u * (r.hi - r.lo)
        }))
    }

    pub fn contains(&self, params: &ModelParams) -> bool {
        let v = params.to_array();
        self.ranges.iter().zip(v).all(|(r, x)| r.contains(x))
    }
}

/// One retained parameter draw.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedDraw {
    pub params: ModelParams,
    pub distance: f64,
    pub weight: f64,
}

/// Accepted draws plus per-stage acceptance bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEnsemble {
    pub draws: Vec<AcceptedDraw>,
    /// Distance threshold that applied at each stage (for quantile rules,
    /// the realized maximum accepted distance).
    pub epsilons: Vec<f64>,
    pub attempts: Vec<usize>,
    pub acceptance_rates: Vec<f64>,
}

impl PosteriorEnsemble {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Acceptance rule for rejection ABC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcceptRule {
    /// Keep draws with distance <= epsilon.
    Epsilon(f64),
    /// Keep the best ceil(q * n) draws.
    Quantile(f64),
}

/// Epsilon schedule for ABC-SMC.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Explicit strictly-decreasing thresholds, one per stage.
    Fixed(Vec<f64>),
    /// Stage thresholds chosen as the `keep_quantile` quantile of the
    /// previous population's distances; the first stage keeps the best
    /// `pop_size` of `ceil(pop_size / keep_quantile)` prior draws.
    Adaptive { stages: usize, keep_quantile: f64 },
}

impl Default for Schedule {
    /// Halving the distance quantile each stage tightens steadily without
    /// starving later stages; sharper quantiles stall on the flat posterior
    /// directions this model has (the normalized observable forgets scale).
    fn default() -> Self {
        Schedule::Adaptive {
            stages: 4,
            keep_quantile: 0.5,
        }
    }
}

/// Root-mean-square error between two date-aligned series.
pub fn distance(sim: &DailySeries, obs: &DailySeries) -> Result<f64> {
    if !sim.aligned_with(obs) {
        return Err(Error::Misaligned(format!(
            "series cover different dates: {} x{} vs {} x{}",
            sim.start,
            sim.len(),
            obs.start,
            obs.len()
        )));
    }
    if sim.is_empty() {
        return Err(Error::Misaligned("cannot compare empty series".into()));
    }
    let sum: f64 = sim
        .values
        .iter()
        .zip(&obs.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / sim.len() as f64).sqrt())
}

/// Deterministic seed derivation for the independent random phases of a run
/// (prior draws, per-stage proposals, per-proposal simulations, resampling).
pub(crate) fn phase_seed(base: u64, phase: u64) -> u64 {
    // splitmix64 over base + phase * golden ratio increment
    let mut z = base.wrapping_add(phase.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const PHASE_PRIOR: u64 = 1;
const PHASE_RESAMPLE: u64 = 2;
const PHASE_PREDICTIVE: u64 = 3;
const PHASE_STAGE_PROPOSALS: u64 = 0x100;
const PHASE_STAGE_SIMS: u64 = 0x200;

/// Simulated proposals per particle a stage may burn before giving up.
/// Out-of-support proposals cost only generator draws and are bounded
/// separately (see `smc_stage`).
const ATTEMPT_FACTOR: usize = 40;

fn sim_distance(
    params: &ModelParams,
    net: &SocialNetwork,
    signal: &crate::data::ExternalSignal,
    obs: &DailySeries,
    seed: u64,
) -> Result<f64> {
    let traj = run_simulation(params, net, signal, seed)?;
    let sim = observable_transform(&traj, Channel::Behaviour);
    distance(&sim, obs)
}

fn check_obs_alignment(obs: &DailySeries, signal: &crate::data::ExternalSignal) -> Result<()> {
    if !obs.aligned_with(&signal.series) {
        return Err(Error::Misaligned(format!(
            "observed series ({} x{}) does not cover the signal window ({} x{})",
            obs.start,
            obs.len(),
            signal.series.start,
            signal.series.len()
        )));
    }
    Ok(())
}

/// Plain rejection ABC: sample the prior, simulate, keep draws under the
/// acceptance rule. Accepted draws keep their draw order and equal weights.
pub fn abc_rejection(
    prior: &PriorSpec,
    obs: &DailySeries,
    net: &SocialNetwork,
    signal: &crate::data::ExternalSignal,
    n_draws: usize,
    rule: AcceptRule,
    base_seed: u64,
) -> Result<PosteriorEnsemble> {
    prior.validate()?;
    check_obs_alignment(obs, signal)?;
    if n_draws == 0 {
        return Err(Error::Calibration("n_draws must be >= 1".into()));
    }
    match rule {
        AcceptRule::Epsilon(e) if e.is_nan() || e <= 0.0 => {
            return Err(Error::Calibration(format!("epsilon must be > 0, got {e}")))
        }
        AcceptRule::Quantile(q) if !(q > 0.0 && q <= 1.0) => {
            return Err(Error::Calibration(format!(
                "acceptance quantile must be in (0, 1], got {q}"
            )))
        }
        _ => {}
    }

    let mut prior_rng = ChaCha12Rng::seed_from_u64(phase_seed(base_seed, PHASE_PRIOR));
    let draws: Vec<ModelParams> = (0..n_draws).map(|_| prior.sample(&mut prior_rng)).collect();
    let sim_base = phase_seed(base_seed, PHASE_STAGE_SIMS);
    let distances: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|i| sim_distance(&draws[i], net, signal, obs, sim_base.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;

    let accepted_idx: Vec<usize> = match rule {
        AcceptRule::Epsilon(eps) => {
            let idx: Vec<usize> = (0..n_draws).filter(|&i| distances[i] <= eps).collect();
            if idx.is_empty() {
                let min = distances.iter().cloned().fold(f64::INFINITY, f64::min);
                return Err(Error::Calibration(format!(
                    "no acceptances at epsilon {eps}: minimum distance over {n_draws} draws was {min}"
                )));
            }
            idx
        }
        AcceptRule::Quantile(q) => {
            let k = ((q * n_draws as f64).ceil() as usize).clamp(1, n_draws);
            let mut order: Vec<usize> = (0..n_draws).collect();
            order.sort_by(|&a, &b| {
                distances[a]
                    .partial_cmp(&distances[b])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut keep: Vec<usize> = order.into_iter().take(k).collect();
            keep.sort_unstable();
            keep
        }
    };

    let k = accepted_idx.len();
    let w = 1.0 / k as f64;
    let max_d = accepted_idx
        .iter()
        .map(|&i| distances[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let eps_realized = match rule {
        AcceptRule::Epsilon(e) => e,
        AcceptRule::Quantile(_) => max_d,
    };
    Ok(PosteriorEnsemble {
        draws: accepted_idx
            .into_iter()
            .map(|i| AcceptedDraw {
                params: draws[i],
                distance: distances[i],
                weight: w,
            })
            .collect(),
        epsilons: vec![eps_realized],
        attempts: vec![n_draws],
        acceptance_rates: vec![k as f64 / n_draws as f64],
    })
}

fn weighted_pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u <= acc {
            return i;
        }
    }
    weights.len() - 1
}

fn normal_pdf(x: f64, sd: f64) -> f64 {
    let z = x / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Weighted per-dimension standard deviations of the perturbation kernel:
/// sqrt(2 * weighted variance) per the usual ABC-SMC heuristic. Pinned or
/// degenerate dimensions get sd 0 (copied through, skipped in the density).
fn kernel_sds(pop: &[AcceptedDraw], prior: &PriorSpec) -> [f64; 12] {
    let mut mean = [0.0; 12];
    for d in pop {
        let v = d.params.to_array();
        for (m, x) in mean.iter_mut().zip(v) {
            *m += d.weight * x;
        }
    }
    let mut var = [0.0; 12];
    for d in pop {
        let v = d.params.to_array();
        for i in 0..12 {
            let dx = v[i] - mean[i];
            var[i] += d.weight * dx * dx;
        }
    }
    std::array::from_fn(|i| {
        if prior.ranges[i].is_pinned() {
            0.0
        } else {
            (2.0 * var[i]).sqrt()
        }
    })
}

struct StageOutcome {
    accepted: Vec<(usize, ModelParams, f64)>, // (proposal index, params, distance)
    attempts: usize,                          // simulations run
}

/// Run one SIR stage: propose from the previous population until `pop_size`
/// acceptances under `eps`, in proposal order. Proposal generation is
/// sequential on one stream; out-of-support proposals are discarded before
/// simulation and cost only generator draws. Simulations are seeded by
/// proposal index and evaluated in parallel batches.
#[allow(clippy::too_many_arguments)]
fn smc_stage(
    stage: usize,
    prev: &[AcceptedDraw],
    sds: &[f64; 12],
    eps: f64,
    pop_size: usize,
    prior: &PriorSpec,
    obs: &DailySeries,
    net: &SocialNetwork,
    signal: &crate::data::ExternalSignal,
    base_seed: u64,
) -> Result<StageOutcome> {
    let weights: Vec<f64> = prev.iter().map(|d| d.weight).collect();
    let mut proposal_rng = ChaCha12Rng::seed_from_u64(phase_seed(
        base_seed,
        PHASE_STAGE_PROPOSALS + stage as u64,
    ));
    let sim_base = phase_seed(base_seed, PHASE_STAGE_SIMS + stage as u64);
    let sim_cap = ATTEMPT_FACTOR * pop_size;
    // Guards against a kernel whose support barely overlaps the prior.
    let proposal_cap = sim_cap.saturating_mul(50);
    let batch_size = pop_size.max(64);

    let mut accepted: Vec<(usize, ModelParams, f64)> = Vec::with_capacity(pop_size);
    let mut sims = 0usize;
    let mut proposals = 0usize;
    while accepted.len() < pop_size && sims < sim_cap && proposals < proposal_cap {
        let n_batch = batch_size.min(sim_cap - sims);
        // Sequential proposal generation keeps the stream deterministic.
        let mut batch: Vec<(usize, ModelParams)> = Vec::with_capacity(n_batch);
        while batch.len() < n_batch && proposals < proposal_cap {
            let idx = proposals;
            proposals += 1;
            let u: f64 = proposal_rng.random();
            let ancestor = prev[weighted_pick(&weights, u)].params.to_array();
            // Always draw all 12 normals so the stream position is
            // independent of which dimensions are pinned.
            let proposal = ModelParams::from_array(std::array::from_fn(|d| {
                let z: f64 = proposal_rng.sample(StandardNormal);
                ancestor[d] + sds[d] * z
            }));
            if prior.contains(&proposal) {
                batch.push((idx, proposal));
            }
        }
        let results: Vec<(usize, ModelParams, f64)> = batch
            .par_iter()
            .map(|(idx, params)| {
                let d = sim_distance(
                    params,
                    net,
                    signal,
                    obs,
                    sim_base.wrapping_add(*idx as u64),
                )?;
                Ok((*idx, *params, d))
            })
            .collect::<Result<_>>()?;
        sims += results.len();
        for item in results {
            if accepted.len() < pop_size && item.2 <= eps {
                accepted.push(item);
            }
        }
    }
    if accepted.len() < pop_size {
        return Err(Error::Calibration(format!(
            "stage {stage} collapsed: {}/{} particles accepted after {} simulations from {} proposals (acceptance rate {:.4})",
            accepted.len(),
            pop_size,
            sims,
            proposals,
            if sims > 0 {
                accepted.len() as f64 / sims as f64
            } else {
                0.0
            }
        )));
    }
    Ok(StageOutcome {
        accepted,
        attempts: sims,
    })
}

/// Importance weights of a new population given its predecessor: with
/// uniform priors, w_i is proportional to 1 / sum_j w_j K(theta_i | theta_j)
/// over the Gaussian kernel restricted to perturbed dimensions.
fn smc_weights(new_pop: &[(usize, ModelParams, f64)], prev: &[AcceptedDraw], sds: &[f64; 12]) -> Vec<f64> {
    let active: Vec<usize> = (0..12).filter(|&i| sds[i] > 0.0).collect();
    let mut out = Vec::with_capacity(new_pop.len());
    for (_, params, _) in new_pop {
        let v = params.to_array();
        let mut denom = 0.0;
        for prev_draw in prev {
            let a = prev_draw.params.to_array();
            let mut k = 1.0;
            for &d in &active {
                k *= normal_pdf(v[d] - a[d], sds[d]);
            }
            denom += prev_draw.weight * k;
        }
        out.push(1.0 / denom.max(f64::MIN_POSITIVE));
    }
    let total: f64 = out.iter().sum();
    for w in &mut out {
        *w /= total;
    }
    out
}

/// Sequential ABC: an initial rejection stage followed by importance
/// resampling with kernel perturbation at tightening thresholds.
pub fn abc_smc(
    prior: &PriorSpec,
    obs: &DailySeries,
    net: &SocialNetwork,
    signal: &crate::data::ExternalSignal,
    schedule: &Schedule,
    pop_size: usize,
    base_seed: u64,
) -> Result<PosteriorEnsemble> {
    prior.validate()?;
    check_obs_alignment(obs, signal)?;
    if pop_size < 2 {
        return Err(Error::Calibration(format!(
            "pop_size must be >= 2, got {pop_size}"
        )));
    }
    let (n_stages, keep_quantile, fixed) = match schedule {
        Schedule::Fixed(eps) => {
            if eps.is_empty() {
                return Err(Error::Calibration("empty epsilon schedule".into()));
            }
            if eps.iter().any(|e| !e.is_finite() || *e <= 0.0) {
                return Err(Error::Calibration(
                    "epsilon schedule values must be positive and finite".into(),
                ));
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Calibration(
                    "epsilon schedule must be strictly decreasing".into(),
                ));
            }
            (eps.len(), 0.0, Some(eps.clone()))
        }
        Schedule::Adaptive {
            stages,
            keep_quantile,
        } => {
            if *stages == 0 {
                return Err(Error::Calibration("stages must be >= 1".into()));
            }
            if !(*keep_quantile > 0.0 && *keep_quantile <= 1.0) {
                return Err(Error::Calibration(format!(
                    "keep_quantile must be in (0, 1], got {keep_quantile}"
                )));
            }
            (*stages, *keep_quantile, None)
        }
    };

    let mut epsilons = Vec::with_capacity(n_stages);
    let mut attempts = Vec::with_capacity(n_stages);
    let mut rates = Vec::with_capacity(n_stages);

    // Stage 0: prior draws.
    let mut prior_rng = ChaCha12Rng::seed_from_u64(phase_seed(base_seed, PHASE_PRIOR));
    let sim_base = phase_seed(base_seed, PHASE_STAGE_SIMS);
    let mut population: Vec<AcceptedDraw> = match &fixed {
        None => {
            // Oversample so the best pop_size draws realize the quantile.
            let n0 = ((pop_size as f64 / keep_quantile).ceil() as usize).max(pop_size);
            let draws: Vec<ModelParams> =
                (0..n0).map(|_| prior.sample(&mut prior_rng)).collect();
            let distances: Vec<f64> = (0..n0)
                .into_par_iter()
                .map(|i| {
                    sim_distance(&draws[i], net, signal, obs, sim_base.wrapping_add(i as u64))
                })
                .collect::<Result<_>>()?;
            let mut order: Vec<usize> = (0..n0).collect();
            order.sort_by(|&a, &b| {
                distances[a]
                    .partial_cmp(&distances[b])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut keep: Vec<usize> = order.into_iter().take(pop_size).collect();
            keep.sort_unstable();
            let eps0 = keep
                .iter()
                .map(|&i| distances[i])
                .fold(f64::NEG_INFINITY, f64::max);
            epsilons.push(eps0);
            attempts.push(n0);
            rates.push(pop_size as f64 / n0 as f64);
            let w = 1.0 / pop_size as f64;
            keep.into_iter()
                .map(|i| AcceptedDraw {
                    params: draws[i],
                    distance: distances[i],
                    weight: w,
                })
                .collect()
        }
        Some(eps_list) => {
            let eps0 = eps_list[0];
            let cap = ATTEMPT_FACTOR * pop_size;
            let batch_size = pop_size.max(64);
            let mut accepted: Vec<AcceptedDraw> = Vec::with_capacity(pop_size);
            let mut tried = 0usize;
            while accepted.len() < pop_size && tried < cap {
                let n_batch = batch_size.min(cap - tried);
                let draws: Vec<ModelParams> = (0..n_batch)
                    .map(|_| prior.sample(&mut prior_rng))
                    .collect();
                let distances: Vec<f64> = (0..n_batch)
                    .into_par_iter()
                    .map(|j| {
                        sim_distance(
                            &draws[j],
                            net,
                            signal,
                            obs,
                            sim_base.wrapping_add((tried + j) as u64),
                        )
                    })
                    .collect::<Result<_>>()?;
                for (p, d) in draws.into_iter().zip(distances) {
                    if accepted.len() < pop_size && d <= eps0 {
                        accepted.push(AcceptedDraw {
                            params: p,
                            distance: d,
                            weight: 0.0,
                        });
                    }
                }
                tried += n_batch;
            }
            if accepted.len() < pop_size {
                return Err(Error::Calibration(format!(
                    "stage 0 collapsed: {}/{} particles accepted after {} proposals (acceptance rate {:.4})",
                    accepted.len(),
                    pop_size,
                    tried,
                    accepted.len() as f64 / tried as f64
                )));
            }
            epsilons.push(eps0);
            attempts.push(tried);
            rates.push(pop_size as f64 / tried as f64);
            let w = 1.0 / pop_size as f64;
            for a in &mut accepted {
                a.weight = w;
            }
            accepted
        }
    };

    // Later stages: perturb, filter, reweight.
    for stage in 1..n_stages {
        let eps = match &fixed {
            Some(eps_list) => eps_list[stage],
            None => {
                let mut ds: Vec<f64> = population.iter().map(|d| d.distance).collect();
                ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                quantile_type7(&ds, keep_quantile)
            }
        };
        let sds = kernel_sds(&population, prior);
        let outcome = smc_stage(
            stage, &population, &sds, eps, pop_size, prior, obs, net, signal, base_seed,
        )?;
        let weights = smc_weights(&outcome.accepted, &population, &sds);
        epsilons.push(eps);
        attempts.push(outcome.attempts);
        rates.push(pop_size as f64 / outcome.attempts as f64);
        population = outcome
            .accepted
            .into_iter()
            .zip(weights)
            .map(|((_, params, distance), weight)| AcceptedDraw {
                params,
                distance,
                weight,
            })
            .collect();
    }

    Ok(PosteriorEnsemble {
        draws: population,
        epsilons,
        attempts,
        acceptance_rates: rates,
    })
}

/// Posterior-predictive bands: resample the ensemble by weight (at least two
/// members) and run the resampled draws as a fresh ensemble, so the bands
/// carry both parameter and run-to-run noise.
pub fn posterior_predictive(
    post: &PosteriorEnsemble,
    net: &SocialNetwork,
    signal: &crate::data::ExternalSignal,
    base_seed: u64,
) -> Result<SummaryBands> {
    if post.is_empty() {
        return Err(Error::Calibration(
            "posterior ensemble is empty".into(),
        ));
    }
    let weights: Vec<f64> = post.draws.iter().map(|d| d.weight).collect();
    let m = post.len().max(2);
    let mut rng = ChaCha12Rng::seed_from_u64(phase_seed(base_seed, PHASE_RESAMPLE));
    let resampled: Vec<ModelParams> = (0..m)
        .map(|_| {
            let u: f64 = rng.random();
            post.draws[weighted_pick(&weights, u)].params
        })
        .collect();
    run_ensemble(
        &resampled,
        net,
        signal,
        phase_seed(base_seed, PHASE_PREDICTIVE),
    )
}

/// Write accepted draws as CSV: one column per parameter plus distance and
/// weight.
pub fn write_posterior_csv(path: &Path, post: &PosteriorEnsemble) -> Result<()> {
    let mut out = String::new();
    out.push_str(&PARAM_NAMES.join(","));
    out.push_str(",distance,weight\n");
    for d in &post.draws {
        let v = d.params.to_array();
        let fields: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        out.push_str(&format!(
            "{},{},{}\n",
            fields.join(","),
            d.distance,
            d.weight
        ));
    }
    let mut f =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Read a posterior CSV written by `write_posterior_csv`.
pub fn read_posterior_csv(path: &Path) -> Result<Vec<AcceptedDraw>> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(p.clone(), e))?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l)
        .ok_or_else(|| Error::Data {
            path: p.clone(),
            reason: "empty posterior file".into(),
        })?;
    let expect = format!("{},distance,weight", PARAM_NAMES.join(","));
    if header.trim() != expect {
        return Err(Error::Data {
            path: p,
            reason: format!("unexpected posterior header {header:?}"),
        });
    }
    let mut draws = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("expected 14 columns, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|e| Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("bad number {s:?}: {e}"),
            })
        };
        let mut v = [0.0; 12];
        for (slot, field) in v.iter_mut().zip(&fields[..12]) {
            *slot = parse(field)?;
        }
        draws.push(AcceptedDraw {
            params: ModelParams::from_array(v),
            distance: parse(fields[12])?,
            weight: parse(fields[13])?,
        });
    }
    Ok(draws)
}

//! Per-agent daily dynamics: the strengthening cascade, the weakening
//! feedback, and social coupling toward network neighbours.
//!
//! All state fields live in [0,1] and every update clamps, so trajectories
//! are bounded by construction. A day is one synchronous step: strengthen,
//! weaken, couple (against the pre-day snapshot), then emotion noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::SocialNetwork;

/// One individual's bounded state: perceived risk, emotional intensity,
/// and protective/information-seeking behaviour level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub perception: f64,
    pub emotion: f64,
    pub behaviour: f64,
}

impl AgentState {
    pub fn new(perception: f64, emotion: f64, behaviour: f64) -> Result<Self> {
        let state = AgentState {
            perception,
            emotion,
            behaviour,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("perception", self.perception),
            ("emotion", self.emotion),
            ("behaviour", self.behaviour),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be finite and in [0, 1], got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Free parameters of the dynamics. `alpha_*` are the strengthening gains,
/// `beta_*`/`delta_b` the weakening rates, `kappa_*` the coupling strengths,
/// `sigma` the daily emotion noise scale, `init_*` the uniform initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha_p: f64,
    pub alpha_e: f64,
    pub alpha_b: f64,
    pub beta_p: f64,
    pub beta_e: f64,
    pub delta_b: f64,
    pub kappa_e: f64,
    pub kappa_b: f64,
    pub sigma: f64,
    pub init_p: f64,
    pub init_e: f64,
    pub init_b: f64,
}

/// Field order used everywhere parameters are treated as a vector
/// (priors, posterior CSV columns, perturbation kernels).
pub const PARAM_NAMES: [&str; 12] = [
    "alpha_p", "alpha_e", "alpha_b", "beta_p", "beta_e", "delta_b", "kappa_e", "kappa_b", "sigma",
    "init_p", "init_e", "init_b",
];

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("alpha_p", self.alpha_p),
            ("alpha_e", self.alpha_e),
            ("alpha_b", self.alpha_b),
            ("beta_p", self.beta_p),
            ("beta_e", self.beta_e),
            ("delta_b", self.delta_b),
            ("sigma", self.sigma),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        let unit = [
            ("kappa_e", self.kappa_e),
            ("kappa_b", self.kappa_b),
            ("init_p", self.init_p),
            ("init_e", self.init_e),
            ("init_b", self.init_b),
        ];
        for (name, v) in unit {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be finite and in [0, 1], got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.alpha_p,
            self.alpha_e,
            self.alpha_b,
            self.beta_p,
            self.beta_e,
            self.delta_b,
            self.kappa_e,
            self.kappa_b,
            self.sigma,
            self.init_p,
            self.init_e,
            self.init_b,
        ]
    }

    pub fn from_array(v: [f64; 12]) -> Self {
        ModelParams {
            alpha_p: v[0],
            alpha_e: v[1],
            alpha_b: v[2],
            beta_p: v[3],
            beta_e: v[4],
            delta_b: v[5],
            kappa_e: v[6],
            kappa_b: v[7],
            sigma: v[8],
            init_p: v[9],
            init_e: v[10],
            init_b: v[11],
        }
    }

    pub fn initial_state(&self) -> AgentState {
        AgentState {
            perception: self.init_p,
            emotion: self.init_e,
            behaviour: self.init_b,
        }
    }
}

#[inline]
fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn check_signal(s_t: f64) -> Result<()> {
    if !s_t.is_finite() || !(0.0..=1.0).contains(&s_t) {
        return Err(Error::InvalidParam {
            name: "s_t",
            reason: format!("hazard signal must be finite and in [0, 1], got {s_t}"),
        });
    }
    Ok(())
}

/// Strengthening cascade for one agent: the hazard signal raises perceived
/// risk, the *updated* perception raises emotion, the *updated* emotion
/// raises behaviour. Deterministic; noise is applied elsewhere.
pub fn strengthening_step(state: AgentState, s_t: f64, params: &ModelParams) -> Result<AgentState> {
    check_signal(s_t)?;
    state.validate()?;
    let p = clamp01(state.perception + params.alpha_p * s_t * (1.0 - state.perception));
    let e = clamp01(state.emotion + params.alpha_e * p * (1.0 - state.emotion));
    let b = clamp01(state.behaviour + params.alpha_b * e * (1.0 - state.behaviour));
    Ok(AgentState {
        perception: p,
        emotion: e,
        behaviour: b,
    })
}

/// Weakening feedback: the agent's current behaviour level damps its own
/// perception and emotion, and behaviour itself relaxes. All three terms
/// read the input state, so the output is pointwise <= the input.
pub fn weakening_step(state: AgentState, params: &ModelParams) -> Result<AgentState> {
    state.validate()?;
    let b0 = state.behaviour;
    Ok(AgentState {
        perception: clamp01(state.perception - params.beta_p * b0 * state.perception),
        emotion: clamp01(state.emotion - params.beta_e * b0 * state.emotion),
        behaviour: clamp01(b0 - params.delta_b * b0),
    })
}

/// Relax emotion and behaviour toward the given neighbour means.
/// Perception is never coupled.
#[inline]
fn couple_toward(state: AgentState, mean_e: f64, mean_b: f64, params: &ModelParams) -> AgentState {
    AgentState {
        perception: state.perception,
        emotion: clamp01(state.emotion + params.kappa_e * (mean_e - state.emotion)),
        behaviour: clamp01(state.behaviour + params.kappa_b * (mean_b - state.behaviour)),
    }
}

/// Emotion contagion / behaviour mirroring toward the mean of the
/// neighbours' states. An empty neighbourhood is the identity.
pub fn social_coupling(
    state: AgentState,
    neighbour_states: &[AgentState],
    params: &ModelParams,
) -> AgentState {
    if neighbour_states.is_empty() {
        return state;
    }
    let k = neighbour_states.len() as f64;
    let mean_e = neighbour_states.iter().map(|s| s.emotion).sum::<f64>() / k;
    let mean_b = neighbour_states.iter().map(|s| s.behaviour).sum::<f64>() / k;
    couple_toward(state, mean_e, mean_b, params)
}

/// The per-agent noise stream for a run seed. Agent `i` always draws from
/// stream `i` of the same keyed generator, so an agent's noise sequence does
/// not depend on population size or on what other agents do.
pub fn agent_noise_stream(seed: u64, agent: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(agent);
    rng
}

/// One noise stream per agent, in agent order.
pub fn population_noise_streams(seed: u64, n: usize) -> Vec<ChaCha12Rng> {
    (0..n).map(|i| agent_noise_stream(seed, i as u64)).collect()
}

/// Fresh population with every agent at the configured initial state.
pub fn init_population(params: &ModelParams, n: usize) -> Result<Vec<AgentState>> {
    params.validate()?;
    Ok(vec![params.initial_state(); n])
}

/// Advance the whole population one day, synchronously: every agent is
/// strengthened, weakened, coupled against its neighbours' pre-day states,
/// then gets clamped Gaussian noise on emotion. One standard-normal draw is
/// consumed per agent per day even when `sigma == 0`, so trajectories with
/// and without noise stay on the same random streams.
pub fn step_population(
    pop: &[AgentState],
    net: &SocialNetwork,
    s_t: f64,
    params: &ModelParams,
    rngs: &mut [ChaCha12Rng],
) -> Result<Vec<AgentState>> {
    if pop.len() != net.n() {
        return Err(Error::Misaligned(format!(
            "population has {} agents but network has {} nodes",
            pop.len(),
            net.n()
        )));
    }
    if rngs.len() != pop.len() {
        return Err(Error::Misaligned(format!(
            "population has {} agents but {} noise streams were supplied",
            pop.len(),
            rngs.len()
        )));
    }
    check_signal(s_t)?;
    params.validate()?;

    let mut next = Vec::with_capacity(pop.len());
    for (i, &state) in pop.iter().enumerate() {
        let after = weakening_step(strengthening_step(state, s_t, params)?, params)?;
        let neighbours = net.neighbours(i);
        let coupled = if neighbours.is_empty() {
            after
        } else {
            let mut sum_e = 0.0;
            let mut sum_b = 0.0;
            for &j in neighbours {
                sum_e += pop[j as usize].emotion;
                sum_b += pop[j as usize].behaviour;
            }
            let k = neighbours.len() as f64;
            couple_toward(after, sum_e / k, sum_b / k, params)
        };
        let z: f64 = rngs[i].sample(StandardNormal);
        next.push(AgentState {
            emotion: clamp01(coupled.emotion + params.sigma * z),
            ..coupled
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SocialNetwork;
    use approx::assert_abs_diff_eq;

    fn flat_params() -> ModelParams {
        ModelParams {
            alpha_p: 0.0,
            alpha_e: 0.0,
            alpha_b: 0.0,
            beta_p: 0.0,
            beta_e: 0.0,
            delta_b: 0.0,
            kappa_e: 0.0,
            kappa_b: 0.0,
            sigma: 0.0,
            init_p: 0.2,
            init_e: 0.2,
            init_b: 0.2,
        }
    }

    fn state(p: f64, e: f64, b: f64) -> AgentState {
        AgentState {
            perception: p,
            emotion: e,
            behaviour: b,
        }
    }

    #[test]
    fn strengthening_zero_signal_zero_gains_is_identity() {
        let params = flat_params();
        let s = state(0.2, 0.2, 0.2);
        assert_eq!(strengthening_step(s, 0.0, &params).unwrap(), s);
    }

    #[test]
    fn strengthening_saturation_is_fixed_point() {
        let mut params = flat_params();
        params.alpha_p = 0.7;
        params.alpha_e = 0.9;
        params.alpha_b = 0.3;
        let s = state(1.0, 1.0, 1.0);
        assert_eq!(strengthening_step(s, 1.0, &params).unwrap(), s);
    }

    #[test]
    fn strengthening_matches_hand_arithmetic() {
        let mut params = flat_params();
        params.alpha_p = 0.2;
        params.alpha_e = 0.2;
        params.alpha_b = 0.2;
        let out = strengthening_step(state(0.5, 0.5, 0.5), 1.0, &params).unwrap();
        // Cascade: p' = 0.5 + 0.2*1*0.5 = 0.6; e' = 0.5 + 0.2*0.6*0.5 = 0.56;
        // b' = 0.5 + 0.2*0.56*0.5 = 0.556.
        assert!((out.perception - 0.6).abs() < 1e-15);
        assert!((out.emotion - 0.56).abs() < 1e-15);
        assert!((out.behaviour - 0.556).abs() < 1e-15);
    }

    #[test]
    fn strengthening_rejects_bad_signal() {
        let params = flat_params();
        let s = state(0.5, 0.5, 0.5);
        assert!(strengthening_step(s, 1.5, &params).is_err());
        assert!(strengthening_step(s, -0.1, &params).is_err());
        assert!(strengthening_step(s, f64::NAN, &params).is_err());
    }

    #[test]
    fn weakening_zero_rates_is_identity() {
        let params = flat_params();
        let s = state(0.5, 0.5, 0.5);
        assert_eq!(weakening_step(s, &params).unwrap(), s);
    }

    #[test]
    fn weakening_no_behaviour_is_identity() {
        let mut params = flat_params();
        params.beta_p = 0.4;
        params.beta_e = 0.4;
        let s = state(0.7, 0.3, 0.0);
        assert_eq!(weakening_step(s, &params).unwrap(), s);
    }

    #[test]
    fn weakening_matches_hand_arithmetic() {
        let mut params = flat_params();
        params.beta_p = 0.2;
        params.beta_e = 0.4;
        params.delta_b = 0.1;
        let out = weakening_step(state(0.8, 0.6, 0.5), &params).unwrap();
        assert!((out.perception - 0.72).abs() < 1e-15);
        assert!((out.emotion - 0.48).abs() < 1e-15);
        assert!((out.behaviour - 0.45).abs() < 1e-15);
    }

    #[test]
    fn weakening_is_monotone_non_increasing() {
        let mut params = flat_params();
        params.beta_p = 0.9;
        params.beta_e = 0.9;
        params.delta_b = 0.9;
        let s = state(0.8, 0.6, 0.9);
        let out = weakening_step(s, &params).unwrap();
        assert!(out.perception <= s.perception);
        assert!(out.emotion <= s.emotion);
        assert!(out.behaviour <= s.behaviour);
    }

    #[test]
    fn coupling_with_no_neighbours_is_identity() {
        let mut params = flat_params();
        params.kappa_e = 0.8;
        params.kappa_b = 0.8;
        let s = state(0.3, 0.4, 0.5);
        assert_eq!(social_coupling(s, &[], &params), s);
    }

    #[test]
    fn coupling_consensus_is_fixed_point() {
        let mut params = flat_params();
        params.kappa_e = 0.5;
        params.kappa_b = 0.5;
        let s = state(0.3, 0.4, 0.5);
        assert_eq!(social_coupling(s, &[s, s, s], &params), s);
    }

    #[test]
    fn coupling_matches_hand_arithmetic() {
        let mut params = flat_params();
        params.kappa_e = 0.5;
        let neighbours = [state(0.1, 0.5, 0.2), state(0.9, 0.7, 0.2)];
        let out = social_coupling(state(0.5, 0.2, 0.2), &neighbours, &params);
        // mean neighbour emotion 0.6; e' = 0.2 + 0.5*(0.6 - 0.2) = 0.4
        assert!((out.emotion - 0.4).abs() < 1e-15);
        assert_eq!(out.perception, 0.5);
        assert_eq!(out.behaviour, 0.2);
    }

    #[test]
    fn coupling_never_touches_perception() {
        let mut params = flat_params();
        params.kappa_e = 1.0;
        params.kappa_b = 1.0;
        let out = social_coupling(
            state(0.123, 0.2, 0.2),
            &[state(0.999, 0.9, 0.9)],
            &params,
        );
        assert_eq!(out.perception, 0.123);
        assert_abs_diff_eq!(out.emotion, 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(out.behaviour, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn step_population_identity_dynamics_is_identity() {
        let params = flat_params();
        let net = SocialNetwork::complete(4).unwrap();
        let pop = init_population(&params, 4).unwrap();
        let mut rngs = population_noise_streams(7, 4);
        let next = step_population(&pop, &net, 0.3, &params, &mut rngs).unwrap();
        assert_eq!(next, pop);
    }

    #[test]
    fn step_population_rejects_size_mismatch() {
        let params = flat_params();
        let net = SocialNetwork::complete(4).unwrap();
        let pop = init_population(&params, 3).unwrap();
        let mut rngs = population_noise_streams(7, 3);
        assert!(step_population(&pop, &net, 0.3, &params, &mut rngs).is_err());
    }

    #[test]
    fn step_population_is_deterministic() {
        let mut params = flat_params();
        params.alpha_p = 0.3;
        params.alpha_e = 0.2;
        params.alpha_b = 0.2;
        params.sigma = 0.05;
        params.kappa_e = 0.4;
        let net = SocialNetwork::watts_strogatz(20, 4, 0.2, 11).unwrap();
        let pop = init_population(&params, 20).unwrap();
        let mut a = population_noise_streams(42, 20);
        let mut b = population_noise_streams(42, 20);
        let out_a = step_population(&pop, &net, 0.5, &params, &mut a).unwrap();
        let out_b = step_population(&pop, &net, 0.5, &params, &mut b).unwrap();
        assert_eq!(out_a, out_b);
    }

    #[test]
    fn step_population_coupling_reads_pre_day_states() {
        // Two connected agents; agent 1 starts higher. With full coupling the
        // post-day emotion must average against agent 0's *pre-day* emotion.
        let mut params = flat_params();
        params.kappa_e = 1.0;
        let net = SocialNetwork::from_edges(2, &[(0, 1)]).unwrap();
        let pop = vec![state(0.0, 0.2, 0.0), state(0.0, 0.8, 0.0)];
        let mut rngs = population_noise_streams(1, 2);
        let next = step_population(&pop, &net, 0.0, &params, &mut rngs).unwrap();
        assert!((next[0].emotion - 0.8).abs() < 1e-15);
        assert!((next[1].emotion - 0.2).abs() < 1e-15);
    }

    #[test]
    fn noise_stream_is_per_agent_and_stable() {
        let mut a0 = agent_noise_stream(9, 0);
        let mut a1 = agent_noise_stream(9, 1);
        let x0: f64 = a0.sample(StandardNormal);
        let x1: f64 = a1.sample(StandardNormal);
        assert_ne!(x0, x1);
        let mut again = agent_noise_stream(9, 0);
        let y0: f64 = again.sample(StandardNormal);
        assert_eq!(x0, y0);
    }

    #[test]
    fn params_array_round_trip() {
        let p = ModelParams {
            alpha_p: 0.1,
            alpha_e: 0.2,
            alpha_b: 0.3,
            beta_p: 0.4,
            beta_e: 0.5,
            delta_b: 0.6,
            kappa_e: 0.7,
            kappa_b: 0.8,
            sigma: 0.9,
            init_p: 0.01,
            init_e: 0.02,
            init_b: 0.03,
        };
        assert_eq!(ModelParams::from_array(p.to_array()), p);
    }

    #[test]
    fn params_validation_rejects_out_of_range() {
        let mut p = flat_params();
        p.kappa_e = 1.5;
        assert!(p.validate().is_err());
        let mut p = flat_params();
        p.alpha_p = -0.1;
        assert!(p.validate().is_err());
        let mut p = flat_params();
        p.sigma = f64::NAN;
        assert!(p.validate().is_err());
    }
}

//! Single-photon models: Born-rule measurement, discrete emission,
//! retrodiction, superposed inputs, branch evolution, and full
//! left-cube-to-right-cube trajectories under each ontology.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Angle, JonesVector, ANGLE_TOL};
use crate::audit::ExperimentRecord;
use crate::error::{LabError, Result};
use crate::model::{Channel, ModelId};
use crate::optics::{pbs_combine, ModePair};
use crate::stats::bernoulli;

const NORM_TOL: f64 = 1e-12;

/// Likelihoods below this count as exactly zero; it is the square of the
/// angle tolerance, i.e. the Malus factor an angle error of 1e-9 produces.
const LIKELIHOOD_FLOOR: f64 = ANGLE_TOL * ANGLE_TOL;

/// A unit-norm single-photon polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    jones: JonesVector,
}

impl PhotonState {
    pub fn new(jones: JonesVector) -> Result<Self> {
        let i = jones.intensity();
        if (i - 1.0).abs() > NORM_TOL {
            return Err(LabError::InvalidInput(format!(
                "photon state must have unit norm, got {i}"
            )));
        }
        Ok(PhotonState { jones })
    }

    /// Linear polarization at `tau`.
    pub fn linear(tau: Angle) -> Self {
        PhotonState {
            jones: JonesVector::along(tau, Complex64::new(1.0, 0.0)),
        }
    }

    pub fn jones(&self) -> &JonesVector {
        &self.jones
    }

    pub fn polarization(&self) -> Result<Angle> {
        crate::algebra::pol_angle(&self.jones)
    }

    /// Probability of the transmission channel at a cube set to `sigma`.
    pub fn transmit_probability(&self, sigma: Angle) -> f64 {
        self.jones.project(sigma).norm_sqr().min(1.0)
    }
}

/// Which picture of the photon between and after the cubes is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OntologyMode {
    /// Beables `τ_L` and `τ_R` on both sides, one definite channel per cube.
    DiscreteSymmetric,
    /// Prepared state persists until projected at the right cube.
    Collapse,
    /// Both output branches are kept with their weights.
    NoCollapse,
}

impl OntologyMode {
    pub fn model_id(self) -> ModelId {
        match self {
            OntologyMode::DiscreteSymmetric => ModelId::QmDiscrete,
            OntologyMode::Collapse => ModelId::QmCollapse,
            OntologyMode::NoCollapse => ModelId::QmNoCollapse,
        }
    }
}

/// What the collapse model takes the photon's state to be just before the
/// right cube. The projection postulate itself does not say.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapsePreBeable {
    /// The prepared state `τ_L` persists; nothing before the right cube
    /// depends on `σ_R`.
    #[default]
    Prepared,
    /// The photon already carries the eigenstate it is projected onto, so a
    /// `τ_R` beable precedes the measurement.
    Eigenstate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Probability that the Demon's photon enters on `L = 1`.
    pub input_prior_1: f64,
    pub collapse_pre_beable: CollapsePreBeable,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            input_prior_1: 0.5,
            collapse_pre_beable: CollapsePreBeable::Prepared,
        }
    }
}

/// The two branches leaving a cube when nothing collapses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPair {
    pub weight_1: f64,
    pub weight_0: f64,
    pub state_1: PhotonState,
    pub state_0: PhotonState,
}

impl BranchPair {
    /// Weights indexed by channel bit: `[weight_0, weight_1]`.
    pub fn weights_by_bit(&self) -> [f64; 2] {
        [self.weight_0, self.weight_1]
    }
}

/// Measures `state` at a cube set to `sigma`; returns the channel and the
/// projected state.
pub fn born_measure<R: Rng + ?Sized>(
    state: &PhotonState,
    sigma: Angle,
    rng: &mut R,
) -> (Channel, PhotonState) {
    let channel = Channel::from_bit(bernoulli(rng, state.transmit_probability(sigma)));
    (channel, emit_from_channel(channel, sigma))
}

/// The photon leaving a cube at `sigma_l` when it entered on `channel`.
pub fn emit_from_channel(channel: Channel, sigma_l: Angle) -> PhotonState {
    match channel {
        Channel::Trans => PhotonState::linear(sigma_l),
        Channel::Refl => PhotonState::linear(sigma_l.perpendicular()),
    }
}

/// Posterior probability that a photon seen leaving at `tau_l` entered on
/// `L = 1`, given a prior `prior_1` on that channel.
pub fn retrodict_channel(tau_l: Angle, sigma_l: Angle, prior_1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&prior_1) {
        return Err(LabError::InvalidInput(format!(
            "prior must lie in [0, 1], got {prior_1}"
        )));
    }
    let snap = |x: f64| if x < LIKELIHOOD_FLOOR { 0.0 } else { x };
    let state = PhotonState::linear(tau_l);
    let like_1 = snap(state.transmit_probability(sigma_l));
    let like_0 = snap(state.transmit_probability(sigma_l.perpendicular()));
    let num = prior_1 * like_1;
    let den = num + (1.0 - prior_1) * like_0;
    if den == 0.0 {
        return Err(LabError::UndefinedPosterior);
    }
    Ok(num / den)
}

/// Input amplitudes `cos(τ - σ_L)` on `L = 1` and `sin(τ - σ_L)` on `L = 0`
/// (real, zero relative phase) that make the photon leave at `tau_target`.
pub fn demon_inputs_superposition(sigma_l: Angle, tau_target: Angle) -> ModePair {
    let d = tau_target.diff(sigma_l);
    ModePair::from_amplitudes(
        sigma_l,
        Complex64::new(d.cos(), 0.0),
        Complex64::new(d.sin(), 0.0),
    )
}

/// The photon leaving the left cube when fed a unit-norm superposed input.
pub fn emerging_state(inputs: &ModePair) -> Result<PhotonState> {
    PhotonState::new(pbs_combine(inputs)?)
}

/// Splits `state` at `sigma_r` into weighted branches without sampling.
pub fn evolve_no_collapse(state: &PhotonState, sigma_r: Angle) -> BranchPair {
    let weight_1 = state.transmit_probability(sigma_r);
    let weight_0 = state.transmit_probability(sigma_r.perpendicular());
    BranchPair {
        weight_1,
        weight_0,
        state_1: PhotonState::linear(sigma_r),
        state_0: PhotonState::linear(sigma_r.perpendicular()),
    }
}

/// One run of the two-cube experiment with a uniform input channel.
pub fn run_trajectory<R: Rng + ?Sized>(
    mode: OntologyMode,
    sigma_l: Angle,
    sigma_r: Angle,
    rng: &mut R,
) -> ExperimentRecord {
    run_trajectory_with(&TrajectoryConfig::default(), mode, sigma_l, sigma_r, rng)
}

pub fn run_trajectory_with<R: Rng + ?Sized>(
    config: &TrajectoryConfig,
    mode: OntologyMode,
    sigma_l: Angle,
    sigma_r: Angle,
    rng: &mut R,
) -> ExperimentRecord {
    let in_channel = Channel::from_bit(bernoulli(rng, config.input_prior_1));
    let emitted = emit_from_channel(in_channel, sigma_l);
    let tau_l = channel_axis(in_channel, sigma_l);
    let mut record = ExperimentRecord {
        sigma_l,
        in_channel: Some(in_channel),
        tau_l: Some(tau_l),
        tau_r: None,
        sigma_r,
        out_channel: None,
        weights: None,
        model: mode.model_id(),
    };
    match mode {
        OntologyMode::DiscreteSymmetric => {
            let (out, _) = born_measure(&emitted, sigma_r, rng);
            record.out_channel = Some(out);
            record.tau_r = Some(channel_axis(out, sigma_r));
        }
        OntologyMode::Collapse => {
            let (out, _) = born_measure(&emitted, sigma_r, rng);
            record.out_channel = Some(out);
            if config.collapse_pre_beable == CollapsePreBeable::Eigenstate {
                record.tau_r = Some(channel_axis(out, sigma_r));
            }
        }
        OntologyMode::NoCollapse => {
            record.weights = Some(evolve_no_collapse(&emitted, sigma_r).weights_by_bit());
        }
    }
    record
}

/// Polarization axis of `channel` at a cube set to `sigma`.
pub fn channel_axis(channel: Channel, sigma: Angle) -> Angle {
    match channel {
        Channel::Trans => sigma,
        Channel::Refl => sigma.perpendicular(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{malus, normalize_angle};
    use crate::optics::pbs_combine;
    use crate::stats::{mc_estimate, RandomStream};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn ang(x: f64) -> Angle {
        normalize_angle(x).unwrap()
    }

    #[test]
    fn born_certain_outcomes() {
        let sigma = ang(0.9);
        let mut rng = RandomStream::from_seed(5).rng();
        for _ in 0..1000 {
            let (c, post) = born_measure(&PhotonState::linear(sigma), sigma, &mut rng);
            assert_eq!(c, Channel::Trans);
            assert!(post.polarization().unwrap().approx_eq(sigma));
            let (c, post) =
                born_measure(&PhotonState::linear(sigma.perpendicular()), sigma, &mut rng);
            assert_eq!(c, Channel::Refl);
            assert!(post
                .polarization()
                .unwrap()
                .approx_eq(sigma.perpendicular()));
        }
    }

    #[test]
    fn born_thirty_degrees_frequency() {
        let sigma = ang(0.1);
        let state = PhotonState::linear(sigma.offset(PI / 6.0));
        let t = mc_estimate(
            |r| born_measure(&state, sigma, r).0,
            1_000_000,
            RandomStream::from_seed(77),
        );
        let p = t.frequency(&Channel::Trans);
        assert!((p - 0.75).abs() <= 0.002, "{p}");
    }

    #[test]
    fn emission_examples() {
        let s = ang(0.4);
        assert!(emit_from_channel(Channel::Trans, s)
            .polarization()
            .unwrap()
            .approx_eq(ang(0.4)));
        assert!(emit_from_channel(Channel::Refl, s)
            .polarization()
            .unwrap()
            .approx_eq(ang(0.4 + FRAC_PI_2)));
        let p = emit_from_channel(Channel::Refl, ang(3.0 * FRAC_PI_4))
            .polarization()
            .unwrap();
        assert_abs_diff_eq!(p.radians(), FRAC_PI_4, epsilon = 1e-9);
    }

    #[test]
    fn emission_measurement_duality() {
        let mut rng = RandomStream::from_seed(8).rng();
        for k in 0..36 {
            let s = ang(k as f64 * PI / 36.0);
            for c in Channel::BOTH {
                let state = emit_from_channel(c, s);
                let p1 = state.transmit_probability(s);
                if c == Channel::Trans {
                    assert_abs_diff_eq!(p1, 1.0, epsilon = 1e-15);
                } else {
                    assert!(p1 < 1e-30);
                }
                for _ in 0..50 {
                    assert_eq!(born_measure(&state, s, &mut rng).0, c);
                }
            }
        }
    }

    /// Bayes over the two channels by enumeration.
    fn bayes_oracle(delta: f64, prior_1: f64) -> f64 {
        let likes = [
            (prior_1, delta.cos().powi(2)),
            (1.0 - prior_1, delta.sin().powi(2)),
        ];
        let evidence: f64 = likes.iter().map(|(p, l)| p * l).sum();
        likes[0].0 * likes[0].1 / evidence
    }

    #[test]
    fn retrodiction_examples() {
        let s = ang(0.3);
        assert_eq!(retrodict_channel(s, s, 0.5).unwrap(), 1.0);
        let tau = s.offset(PI / 6.0);
        let half = retrodict_channel(tau, s, 0.5).unwrap();
        assert_abs_diff_eq!(half, bayes_oracle(PI / 6.0, 0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(half, 0.75, epsilon = 1e-12);
        let informed = retrodict_channel(tau, s, 0.99).unwrap();
        assert_abs_diff_eq!(informed, bayes_oracle(PI / 6.0, 0.99), epsilon = 1e-12);
        assert_abs_diff_eq!(informed, 0.996_644, epsilon = 1e-6);
    }

    #[test]
    fn retrodiction_errors() {
        let s = ang(0.3);
        assert_eq!(
            retrodict_channel(s.perpendicular(), s, 1.0),
            Err(LabError::UndefinedPosterior)
        );
        assert!(matches!(
            retrodict_channel(s, s, 1.5),
            Err(LabError::InvalidInput(_))
        ));
    }

    #[test]
    fn superposition_examples() {
        let s = ang(1.2);
        let pair = demon_inputs_superposition(s, s);
        assert_abs_diff_eq!(pair.trans.intensity(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pair.refl.intensity(), 0.0, epsilon = 1e-15);

        let pair = demon_inputs_superposition(ang(0.0), ang(PI / 3.0));
        assert_abs_diff_eq!(pair.trans_amplitude().re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            pair.refl_amplitude().re,
            0.866_025_403_784_438_6,
            epsilon = 1e-12
        );
        let out = emerging_state(&pair).unwrap();
        assert!(out.polarization().unwrap().approx_eq(ang(PI / 3.0)));
    }

    #[test]
    fn branch_examples() {
        let s = ang(0.5);
        let b = evolve_no_collapse(&PhotonState::linear(s), s);
        assert_abs_diff_eq!(b.weight_1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.weight_0, 0.0, epsilon = 1e-15);
        let b = evolve_no_collapse(&PhotonState::linear(s.offset(FRAC_PI_4)), s);
        assert_abs_diff_eq!(b.weight_1, 0.5, epsilon = 1e-12);
        let b = evolve_no_collapse(&PhotonState::linear(s.offset(PI / 6.0)), s);
        assert_abs_diff_eq!(b.weight_1, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(b.weight_0, 0.25, epsilon = 1e-12);
        assert!(b.state_1.polarization().unwrap().approx_eq(s));
        assert!(b
            .state_0
            .polarization()
            .unwrap()
            .approx_eq(s.perpendicular()));
    }

    #[test]
    fn trajectory_equal_settings_copy_channel() {
        let s = ang(0.8);
        let mut rng = RandomStream::from_seed(3).rng();
        for mode in [OntologyMode::DiscreteSymmetric, OntologyMode::Collapse] {
            for _ in 0..10_000 {
                let r = run_trajectory(mode, s, s, &mut rng);
                assert_eq!(r.in_channel, r.out_channel);
            }
        }
    }

    #[test]
    fn trajectory_record_structure() {
        let (sl, sr) = (ang(0.1), ang(1.0));
        let mut rng = RandomStream::from_seed(4).rng();
        for _ in 0..1000 {
            let d = run_trajectory(OntologyMode::DiscreteSymmetric, sl, sr, &mut rng);
            assert!(d.tau_r.unwrap().aligned_with(sr));
            assert!(d.tau_l.unwrap().aligned_with(sl));
            let c = run_trajectory(OntologyMode::Collapse, sl, sr, &mut rng);
            assert!(c.tau_r.is_none() && c.out_channel.is_some());
            let n = run_trajectory(OntologyMode::NoCollapse, sl, sr, &mut rng);
            assert!(n.out_channel.is_none());
            let w = n.weights.unwrap();
            assert_abs_diff_eq!(w[0] + w[1], 1.0, epsilon = 1e-12);
        }
        let cfg = TrajectoryConfig {
            collapse_pre_beable: CollapsePreBeable::Eigenstate,
            ..Default::default()
        };
        let c = run_trajectory_with(&cfg, OntologyMode::Collapse, sl, sr, &mut rng);
        assert!(c.tau_r.unwrap().aligned_with(sr));
    }

    #[test]
    fn trajectory_symmetry_point() {
        let (sl, sr) = (ang(0.0), ang(FRAC_PI_4));
        let t = mc_estimate(
            |r| {
                let rec = run_trajectory(OntologyMode::DiscreteSymmetric, sl, sr, r);
                rec.in_channel == rec.out_channel
            },
            1_000_000,
            RandomStream::from_seed(10),
        );
        assert!((t.frequency(&true) - 0.5).abs() <= 0.002);
    }

    #[test]
    fn retrodiction_matches_monte_carlo() {
        // Uniform input, emission at σ_L, then ask which τ_L came from L = 1.
        // Under Discreteness τ_L fixes the channel, so the posterior is 0 or 1;
        // a general τ_L is reached through a superposed input instead.
        let s = ang(0.2);
        let n = 200_000u64;
        let t = mc_estimate(
            |r| {
                let rec = run_trajectory(OntologyMode::DiscreteSymmetric, s, s, r);
                (rec.tau_l.unwrap().approx_eq(s), rec.in_channel.unwrap())
            },
            n,
            RandomStream::from_seed(12),
        );
        let at_sigma = t.count(&(true, Channel::Trans)) + t.count(&(true, Channel::Refl));
        let p_hat = t.count(&(true, Channel::Trans)) as f64 / at_sigma as f64;
        let p = retrodict_channel(s, s, 0.5).unwrap();
        assert_abs_diff_eq!(p_hat, p, epsilon = 1e-12);

        // General τ_L: a uniformly chosen channel, then a τ_L analyzer on the
        // emerging photon. Among photons that pass, the L = 1 share is the
        // Malus-weighted posterior.
        let tau = s.offset(0.6);
        let t = mc_estimate(
            |r| {
                let c = Channel::from_bit(crate::stats::fair_bit(r));
                let axis = channel_axis(c, s);
                let seen = bernoulli(r, malus(tau.diff(axis)));
                (seen, c)
            },
            n,
            RandomStream::from_seed(13),
        );
        let seen = t.count(&(true, Channel::Trans)) + t.count(&(true, Channel::Refl));
        let p_hat = t.count(&(true, Channel::Trans)) as f64 / seen as f64;
        let p = retrodict_channel(tau, s, 0.5).unwrap();
        let se = crate::stats::binomial_se(p, seen);
        assert!((p_hat - p).abs() <= 4.0 * se, "{p_hat} vs {p}");
    }

    #[test]
    fn superposition_targets_dense_grid() {
        for i in 0..90 {
            for j in 0..90 {
                let (s, tau) = (ang(i as f64 * PI / 90.0), ang(j as f64 * PI / 90.0 + 0.003));
                let out = pbs_combine(&demon_inputs_superposition(s, tau)).unwrap();
                assert!(crate::algebra::pol_angle(&out).unwrap().approx_eq(tau));
            }
        }
    }

    proptest! {
        #[test]
        fn superposition_completeness(s in 0f64..PI, t in 0f64..PI) {
            let tau = ang(t);
            let pair = demon_inputs_superposition(ang(s), tau);
            prop_assert!((pair.total_intensity() - 1.0).abs() <= 1e-12);
            let out = emerging_state(&pair).unwrap();
            prop_assert!(out.polarization().unwrap().approx_eq(tau));
        }

        #[test]
        fn branch_weights_normalized(t in 0f64..PI, s in 0f64..PI) {
            let b = evolve_no_collapse(&PhotonState::linear(ang(t)), ang(s));
            prop_assert!((b.weight_1 + b.weight_0 - 1.0).abs() <= 1e-12);
            prop_assert!((b.weight_1 - malus(t - s)).abs() <= 1e-12);
        }
    }
}

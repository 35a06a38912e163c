//! Retrocausal hidden-variable toy models and the settings-dependence
//! detector.
//!
//! The two-bit model replaces the continuous beables `τ_L`, `τ_R` with one
//! two-bit value whose first bit is the past (input) channel and whose
//! second bit is the future (output) channel. Its law depends on both cube
//! settings:
//!
//! ```text
//! Pr(00 ∨ 11) = cos²(σ_L − σ_R)     Pr(01 ∨ 10) = sin²(σ_L − σ_R)
//! ```
//!
//! Each union is split evenly, which keeps the past-bit marginal uniform.
//!
//! The one-bit model keeps only the parity `same_channel` (`1` when the
//! output channel equals the input channel), with `P(same) = cos²(σ_L − σ_R)`.
//! Labeling the matching pairs `00`, `11` with parity `0` instead would be an
//! equivalent convention; what matters is that `cos²` goes to the matching
//! value.

use rand::Rng;
use serde::Serialize;

use crate::algebra::{malus, Angle};
use crate::audit::ExperimentRecord;
use crate::error::{LabError, Result};
use crate::model::{Channel, ModelId};
use crate::optics::{demon_inputs_classical, pbs_combine};
use crate::photon::{
    channel_axis, emit_from_channel, CollapsePreBeable, OntologyMode, TrajectoryConfig,
};
use crate::stats::{
    bernoulli, empirical_tv_threshold, fair_bit, mutual_information_bits, RandomStream, TallyTable,
};

/// TV distance above which an analytic comparison counts as a dependence.
pub const ANALYTIC_RETRO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TwoBitValue {
    pub past_bit: bool,
    pub future_bit: bool,
}

impl TwoBitValue {
    pub fn index(self) -> usize {
        2 * self.past_bit as usize + self.future_bit as usize
    }

    pub fn from_index(i: usize) -> Self {
        TwoBitValue {
            past_bit: i & 2 != 0,
            future_bit: i & 1 != 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ParityBit {
    pub same_channel: bool,
}

/// Probabilities over (past channel, future channel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HVJoint {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl HVJoint {
    /// `[p00, p01, p10, p11]`, indexed by [`TwoBitValue::index`].
    pub fn as_array(&self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        HVJoint {
            p00: p[0],
            p01: p[1],
            p10: p[2],
            p11: p[3],
        }
    }

    pub fn get(&self, past: Channel, future: Channel) -> f64 {
        self.as_array()[2 * past.bit() as usize + future.bit() as usize]
    }

    pub fn match_probability(&self) -> f64 {
        self.p00 + self.p11
    }

    /// `(P(past = 0), P(past = 1))`.
    pub fn past_marginal(&self) -> (f64, f64) {
        (self.p00 + self.p01, self.p10 + self.p11)
    }

    pub fn max_abs_diff(&self, other: &HVJoint) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The joint with past and future exchanged.
    pub fn transposed(&self) -> HVJoint {
        HVJoint {
            p00: self.p00,
            p01: self.p10,
            p10: self.p01,
            p11: self.p11,
        }
    }
}

fn match_mismatch(sigma_l: Angle, sigma_r: Angle) -> (f64, f64) {
    let c = malus(sigma_l.diff(sigma_r));
    (c, 1.0 - c)
}

pub fn twobit_dist(sigma_l: Angle, sigma_r: Angle) -> HVJoint {
    let (c, s) = match_mismatch(sigma_l, sigma_r);
    HVJoint {
        p00: 0.5 * c,
        p01: 0.5 * s,
        p10: 0.5 * s,
        p11: 0.5 * c,
    }
}

pub fn sample_twobit<R: Rng + ?Sized>(sigma_l: Angle, sigma_r: Angle, rng: &mut R) -> TwoBitValue {
    let p = twobit_dist(sigma_l, sigma_r).as_array();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc && pi > 0.0 {
            return TwoBitValue::from_index(i);
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    TwoBitValue::from_index(p.iter().rposition(|&x| x > 0.0).unwrap_or(3))
}

/// Probability that the parity bit reads "same channel".
pub fn onebit_dist(sigma_l: Angle, sigma_r: Angle) -> f64 {
    match_mismatch(sigma_l, sigma_r).0
}

pub fn sample_onebit<R: Rng + ?Sized>(sigma_l: Angle, sigma_r: Angle, rng: &mut R) -> ParityBit {
    ParityBit {
        same_channel: bernoulli(rng, onebit_dist(sigma_l, sigma_r)),
    }
}

/// Joint of (input channel, output channel) for a photon emitted from a
/// uniformly chosen channel at `sigma_l` and measured at `sigma_r`,
/// obtained by enumerating both channels.
pub fn qm_reference_joint(sigma_l: Angle, sigma_r: Angle) -> HVJoint {
    let mut p = [0.0; 4];
    for input in Channel::BOTH {
        let state = emit_from_channel(input, sigma_l);
        for output in Channel::BOTH {
            let likelihood = state.transmit_probability(channel_axis(output, sigma_r));
            p[2 * input.bit() as usize + output.bit() as usize] = 0.5 * likelihood;
        }
    }
    HVJoint::from_array(p)
}

/// Record of one two-bit run: the bits are the channels.
pub fn twobit_record<R: Rng + ?Sized>(
    sigma_l: Angle,
    sigma_r: Angle,
    rng: &mut R,
) -> ExperimentRecord {
    let v = sample_twobit(sigma_l, sigma_r, rng);
    ExperimentRecord::channels_only(
        ModelId::TwoBit,
        sigma_l,
        Channel::from_bit(v.past_bit),
        sigma_r,
        Channel::from_bit(v.future_bit),
    )
}

/// Record of one one-bit run: a uniform, independent input channel and an
/// output channel fixed by the parity.
pub fn onebit_record<R: Rng + ?Sized>(
    sigma_l: Angle,
    sigma_r: Angle,
    rng: &mut R,
) -> ExperimentRecord {
    let input = Channel::from_bit(fair_bit(rng));
    let parity = sample_onebit(sigma_l, sigma_r, rng);
    let output = if parity.same_channel {
        input
    } else {
        input.flipped()
    };
    ExperimentRecord::channels_only(ModelId::OneBit, sigma_l, input, sigma_r, output)
}

/// Mutual information (bits) between a model's hidden variable and the
/// input channel, at the given settings.
///
/// For the two-bit model the beable contains the input channel (1 bit); the
/// one-bit parity is independent of a uniform input (0 bits).
pub fn beable_input_information(model: ModelId, sigma_l: Angle, sigma_r: Angle) -> Result<f64> {
    let joint: Vec<Vec<f64>> = match model {
        ModelId::TwoBit => {
            let p = twobit_dist(sigma_l, sigma_r).as_array();
            (0..4)
                .map(|i| {
                    let v = TwoBitValue::from_index(i);
                    vec![
                        if v.past_bit { 0.0 } else { p[i] },
                        if v.past_bit { p[i] } else { 0.0 },
                    ]
                })
                .collect()
        }
        ModelId::OneBit => {
            let same = onebit_dist(sigma_l, sigma_r);
            [1.0 - same, same]
                .iter()
                .map(|&pp| vec![pp * 0.5, pp * 0.5])
                .collect()
        }
        other => {
            return Err(LabError::Config(format!(
                "'{other}' has no hidden-variable beable"
            )))
        }
    };
    Ok(mutual_information_bits(&joint))
}

/// One component of a pre-measurement beable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum BeablePart {
    Bit(bool),
    Angle(Angle),
}

impl BeablePart {
    fn approx_eq(&self, other: &BeablePart) -> bool {
        match (self, other) {
            (BeablePart::Bit(a), BeablePart::Bit(b)) => a == b,
            (BeablePart::Angle(a), BeablePart::Angle(b)) => a.approx_eq(*b),
            _ => false,
        }
    }
}

/// A finite distribution over beable configurations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeableDistribution {
    pub atoms: Vec<(Vec<BeablePart>, f64)>,
}

impl BeableDistribution {
    fn push(&mut self, value: Vec<BeablePart>, mass: f64) {
        // atoms are few, a linear scan is enough
        if let Some(atom) = self.atoms.iter_mut().find(|(v, _)| {
            v.len() == value.len() && v.iter().zip(&value).all(|(a, b)| a.approx_eq(b))
        }) {
            atom.1 += mass;
        } else {
            self.atoms.push((value, mass));
        }
    }

    fn find(&self, value: &[BeablePart]) -> Option<f64> {
        self.atoms
            .iter()
            .find(|(v, _)| {
                v.len() == value.len() && v.iter().zip(value).all(|(a, b)| a.approx_eq(b))
            })
            .map(|(_, m)| *m)
    }

    pub fn tv_distance(&self, other: &BeableDistribution) -> f64 {
        let mut sum = 0.0;
        for (v, m) in &self.atoms {
            sum += (m - other.find(v).unwrap_or(0.0)).abs();
        }
        for (v, m) in &other.atoms {
            if self.find(v).is_none() {
                sum += m;
            }
        }
        (0.5 * sum).min(1.0)
    }
}

/// Number of Demon targets used to represent the classical model's
/// intermediate beam.
const CLASSICAL_TARGETS: usize = 12;

/// Exact distribution of everything located before the right cube.
pub fn pre_right_beables(
    model: ModelId,
    config: &TrajectoryConfig,
    sigma_l: Angle,
    sigma_r: Angle,
) -> Result<BeableDistribution> {
    let mut dist = BeableDistribution { atoms: Vec::new() };
    match model {
        ModelId::TwoBit => {
            for (i, p) in twobit_dist(sigma_l, sigma_r)
                .as_array()
                .into_iter()
                .enumerate()
            {
                let v = TwoBitValue::from_index(i);
                dist.push(
                    vec![BeablePart::Bit(v.past_bit), BeablePart::Bit(v.future_bit)],
                    p,
                );
            }
        }
        ModelId::OneBit => {
            let same = onebit_dist(sigma_l, sigma_r);
            dist.push(vec![BeablePart::Bit(true)], same);
            dist.push(vec![BeablePart::Bit(false)], 1.0 - same);
        }
        ModelId::QmDiscrete | ModelId::QmCollapse | ModelId::QmNoCollapse => {
            let mode = model.ontology().expect("qm model");
            let with_tau_r = match mode {
                OntologyMode::DiscreteSymmetric => true,
                OntologyMode::Collapse => {
                    config.collapse_pre_beable == CollapsePreBeable::Eigenstate
                }
                OntologyMode::NoCollapse => false,
            };
            for input in Channel::BOTH {
                let prior = if input == Channel::Trans {
                    config.input_prior_1
                } else {
                    1.0 - config.input_prior_1
                };
                let tau_l = channel_axis(input, sigma_l);
                if !with_tau_r {
                    dist.push(vec![BeablePart::Angle(tau_l)], prior);
                    continue;
                }
                let state = emit_from_channel(input, sigma_l);
                for output in Channel::BOTH {
                    let tau_r = channel_axis(output, sigma_r);
                    dist.push(
                        vec![BeablePart::Angle(tau_l), BeablePart::Angle(tau_r)],
                        prior * state.transmit_probability(tau_r),
                    );
                }
            }
        }
        ModelId::Classical => {
            // The intermediate beam is whatever the Demon's inputs combine
            // into at the left cube; nothing here can see σ_R.
            for k in 0..CLASSICAL_TARGETS {
                let target =
                    Angle::new(k as f64 * std::f64::consts::PI / CLASSICAL_TARGETS as f64)?;
                let beam = pbs_combine(&demon_inputs_classical(sigma_l, target, 1.0)?)?;
                let tau = crate::algebra::pol_angle(&beam)?;
                dist.push(vec![BeablePart::Angle(tau)], 1.0 / CLASSICAL_TARGETS as f64);
            }
        }
    }
    Ok(dist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RetroMethod {
    Analytic,
    Empirical,
}

/// Result of comparing pre-measurement beables under two right settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetroReport {
    pub model: ModelId,
    pub sigma_l: Angle,
    pub sigma_r: Angle,
    pub sigma_r_alt: Angle,
    pub tv_distance: f64,
    pub threshold: f64,
    pub retro: bool,
    pub method: RetroMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

fn check_alt(sigma_r: Angle, sigma_r_alt: Angle) -> Result<()> {
    if sigma_r.approx_eq(sigma_r_alt) {
        return Err(LabError::InvalidInput(format!(
            "alternative right setting {sigma_r_alt} equals {sigma_r} mod π"
        )));
    }
    Ok(())
}

/// Analytic settings-dependence test with the default trajectory config.
pub fn settings_dependence(
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    sigma_r_alt: Angle,
) -> Result<RetroReport> {
    settings_dependence_with(
        &TrajectoryConfig::default(),
        model,
        sigma_l,
        sigma_r,
        sigma_r_alt,
    )
}

pub fn settings_dependence_with(
    config: &TrajectoryConfig,
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    sigma_r_alt: Angle,
) -> Result<RetroReport> {
    check_alt(sigma_r, sigma_r_alt)?;
    let a = pre_right_beables(model, config, sigma_l, sigma_r)?;
    let b = pre_right_beables(model, config, sigma_l, sigma_r_alt)?;
    let tv = a.tv_distance(&b);
    Ok(RetroReport {
        model,
        sigma_l,
        sigma_r,
        sigma_r_alt,
        tv_distance: tv,
        threshold: ANALYTIC_RETRO_TOL,
        retro: tv > ANALYTIC_RETRO_TOL,
        method: RetroMethod::Analytic,
        n: None,
    })
}

/// Monte Carlo settings-dependence test over `n` simulated records per
/// setting, flagged against [`empirical_tv_threshold`].
///
/// Only models whose pre-measurement beables take finitely many values are
/// supported.
pub fn settings_dependence_empirical(
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    sigma_r_alt: Angle,
    n: u64,
    stream: RandomStream,
) -> Result<RetroReport> {
    check_alt(sigma_r, sigma_r_alt)?;
    if model == ModelId::Classical {
        return Err(LabError::Config(
            "classical beam polarization is continuous; use the analytic test".into(),
        ));
    }
    let tally = |sr: Angle, s: RandomStream| -> Result<TallyTable<Vec<u64>>> {
        let mut t = TallyTable::new();
        let mut err = None;
        crate::stats::for_each_draw(n, s, |rng| {
            match crate::audit::simulate_record(model, sigma_l, sr, rng) {
                Ok(rec) => t.add(rec.pre_right_key()),
                Err(e) => err = Some(e),
            }
        });
        err.map_or(Ok(t), Err)
    };
    let pa = tally(sigma_r, stream.fork(0))?.distribution();
    let pb = tally(sigma_r_alt, stream.fork(1))?.distribution();
    let tv = crate::stats::tv_distance_keyed(&pa, &pb)?;
    let threshold = empirical_tv_threshold(n);
    Ok(RetroReport {
        model,
        sigma_l,
        sigma_r,
        sigma_r_alt,
        tv_distance: tv,
        threshold,
        retro: tv > threshold,
        method: RetroMethod::Empirical,
        n: Some(n),
    })
}

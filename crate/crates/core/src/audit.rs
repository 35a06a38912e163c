//! Forwards/backwards audit of simulated experiment records.
//!
//! A record is one run's history, from the left setting and input channel
//! through the intermediate beables to the right setting and output
//! channel. Reversing a record swaps the left and right halves. A model is
//! time-symmetric when its reversed ensemble at settings `(σ_a, σ_b)` cannot
//! be told apart from its forward ensemble at `(σ_b, σ_a)`.
//!
//! The comparison reduces each record to a discrete signature: the two
//! channels plus, for each intermediate beable, whether it lines up (mod
//! π/2) with the left setting, the right setting, both, or neither. Which
//! slot a beable sits in is not part of the signature, since a replayed
//! history only shows what each beable correlates with. Slot occupancy is
//! checked separately: if reversed records never occur in the forward
//! family but the signature test has no power (degenerate settings), the
//! verdict is inconclusive rather than symmetric.
//!
//! No-collapse records carry branch weights instead of an output channel.
//! They are compared by spreading each record's mass over the weighted
//! channel, with the uniform input prior taken as the time-mirror of the
//! branch bookkeeping and the uncollapsed state left out of the signature.
//! Verdicts for that model are flagged as convention-dependent.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::Angle;
use crate::error::{LabError, Result};
use crate::hvmodels::{onebit_record, twobit_record};
use crate::model::{Channel, ModelId};
use crate::optics::{demon_inputs_classical, pbs_combine};
use crate::photon::{run_trajectory_with, TrajectoryConfig};
use crate::stats::{empirical_tv_threshold, RandomStream, CHUNK_LEN};

/// Smallest ensemble `audit_symmetry` accepts.
pub const MIN_AUDIT_N: u64 = 10_000;

/// One run's full history. `weights`, when present, are branch weights
/// `[w_0, w_1]` for whichever channel slot is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub sigma_l: Angle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_channel: Option<Channel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_l: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_r: Option<Angle>,
    pub sigma_r: Angle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channel: Option<Channel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 2]>,
    pub model: ModelId,
}

/// Which fields of a record are populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SlotPattern {
    pub in_channel: bool,
    pub tau_l: bool,
    pub tau_r: bool,
    pub out_channel: bool,
    pub weights: bool,
}

impl ExperimentRecord {
    pub fn channels_only(
        model: ModelId,
        sigma_l: Angle,
        in_channel: Channel,
        sigma_r: Angle,
        out_channel: Channel,
    ) -> Self {
        ExperimentRecord {
            sigma_l,
            in_channel: Some(in_channel),
            tau_l: None,
            tau_r: None,
            sigma_r,
            out_channel: Some(out_channel),
            weights: None,
            model,
        }
    }

    pub fn slot_pattern(&self) -> SlotPattern {
        SlotPattern {
            in_channel: self.in_channel.is_some(),
            tau_l: self.tau_l.is_some(),
            tau_r: self.tau_r.is_some(),
            out_channel: self.out_channel.is_some(),
            weights: self.weights.is_some(),
        }
    }

    /// Checks the structural invariants of a photon or hidden-variable
    /// record (forward or reversed).
    pub fn validate(&self) -> Result<()> {
        if self.model != ModelId::Classical {
            if let Some(t) = self.tau_l {
                if !t.aligned_with(self.sigma_l) {
                    return Err(LabError::InvalidInput(format!(
                        "tau_l {t} is not aligned with sigma_l {}",
                        self.sigma_l
                    )));
                }
            }
            if let Some(t) = self.tau_r {
                if !t.aligned_with(self.sigma_r) {
                    return Err(LabError::InvalidInput(format!(
                        "tau_r {t} is not aligned with sigma_r {}",
                        self.sigma_r
                    )));
                }
            }
        }
        if let Some([w0, w1]) = self.weights {
            if !(w0 >= 0.0 && w1 >= 0.0 && (w0 + w1 - 1.0).abs() <= 1e-12) {
                return Err(LabError::InvalidInput(format!(
                    "bad branch weights [{w0}, {w1}]"
                )));
            }
            if self.in_channel.is_some() && self.out_channel.is_some() {
                return Err(LabError::InvalidInput(
                    "branch weights need an absent channel slot".into(),
                ));
            }
        }
        Ok(())
    }

    /// Slot pattern a forward record of this model has.
    pub fn forward_pattern(model: ModelId) -> SlotPattern {
        let (in_channel, tau_l, tau_r, out_channel, weights) = match model {
            ModelId::TwoBit | ModelId::OneBit => (true, false, false, true, false),
            ModelId::QmDiscrete => (true, true, true, true, false),
            ModelId::QmCollapse => (true, true, false, true, false),
            ModelId::QmNoCollapse => (true, true, false, false, true),
            ModelId::Classical => (false, true, true, false, false),
        };
        SlotPattern {
            in_channel,
            tau_l,
            tau_r,
            out_channel,
            weights,
        }
    }

    /// Key of the beables located before the right cube, for empirical
    /// settings-dependence tallies.
    pub fn pre_right_key(&self) -> Vec<u64> {
        let bit = |c: Option<Channel>| c.map_or(u64::MAX, |c| c.bit() as u64);
        let angle = |a: Option<Angle>| a.map_or(u64::MAX, |a| a.radians().to_bits());
        match self.model {
            ModelId::TwoBit => vec![bit(self.in_channel), bit(self.out_channel)],
            ModelId::OneBit => vec![(self.in_channel == self.out_channel) as u64],
            _ => vec![angle(self.tau_l), angle(self.tau_r)],
        }
    }
}

/// Plays a record backwards: left and right halves swap.
pub fn reverse_record(r: &ExperimentRecord) -> ExperimentRecord {
    ExperimentRecord {
        sigma_l: r.sigma_r,
        in_channel: r.out_channel,
        tau_l: r.tau_r,
        tau_r: r.tau_l,
        sigma_r: r.sigma_l,
        out_channel: r.in_channel,
        weights: r.weights,
        model: r.model,
    }
}

/// Simulates one forward run of any built-in model.
pub fn simulate_record<R: Rng + ?Sized>(
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    rng: &mut R,
) -> Result<ExperimentRecord> {
    simulate_record_with(&TrajectoryConfig::default(), model, sigma_l, sigma_r, rng)
}

pub fn simulate_record_with<R: Rng + ?Sized>(
    config: &TrajectoryConfig,
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    rng: &mut R,
) -> Result<ExperimentRecord> {
    Ok(match model {
        ModelId::TwoBit => twobit_record(sigma_l, sigma_r, rng),
        ModelId::OneBit => onebit_record(sigma_l, sigma_r, rng),
        ModelId::QmDiscrete | ModelId::QmCollapse | ModelId::QmNoCollapse => {
            let mode = model.ontology().expect("qm model");
            run_trajectory_with(config, mode, sigma_l, sigma_r, rng)
        }
        ModelId::Classical => {
            // The Demon picks the intermediate polarization freely.
            let target = Angle::new(rng.random::<f64>() * std::f64::consts::PI)?;
            let beam = pbs_combine(&demon_inputs_classical(sigma_l, target, 1.0)?)?;
            let tau = crate::algebra::pol_angle(&beam)?;
            ExperimentRecord {
                sigma_l,
                in_channel: None,
                tau_l: Some(tau),
                tau_r: Some(tau),
                sigma_r,
                out_channel: None,
                weights: None,
                model,
            }
        }
    })
}

/// How a beable lines up with the two settings of its record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Left,
    Right,
    Both,
    Neither,
}

impl Alignment {
    pub fn of(beable: Angle, sigma_l: Angle, sigma_r: Angle) -> Self {
        match (beable.aligned_with(sigma_l), beable.aligned_with(sigma_r)) {
            (true, true) => Alignment::Both,
            (true, false) => Alignment::Left,
            (false, true) => Alignment::Right,
            (false, false) => Alignment::Neither,
        }
    }

    pub fn touches_left(self) -> bool {
        matches!(self, Alignment::Left | Alignment::Both)
    }

    pub fn touches_right(self) -> bool {
        matches!(self, Alignment::Right | Alignment::Both)
    }
}

/// Discrete reduction of a record used for ensemble comparison.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RecordSignature {
    pub in_channel: Option<Channel>,
    pub out_channel: Option<Channel>,
    /// Alignment classes of the intermediate beables, sorted.
    pub beables: Vec<Alignment>,
}

/// Weighted signature cells for one record.
pub fn record_signature(r: &ExperimentRecord) -> Vec<(RecordSignature, f64)> {
    let mut beables: Vec<Alignment> = [r.tau_l, r.tau_r]
        .into_iter()
        .flatten()
        .map(|t| Alignment::of(t, r.sigma_l, r.sigma_r))
        .collect();
    beables.sort();
    match (r.weights, r.in_channel, r.out_channel) {
        (Some(w), Some(c), None) => Channel::BOTH
            .into_iter()
            .map(|k| {
                let sig = RecordSignature {
                    in_channel: Some(c),
                    out_channel: Some(k),
                    beables: Vec::new(),
                };
                (sig, w[k.bit() as usize])
            })
            .collect(),
        (Some(w), None, Some(c)) => Channel::BOTH
            .into_iter()
            .map(|k| {
                let sig = RecordSignature {
                    in_channel: Some(k),
                    out_channel: Some(c),
                    beables: Vec::new(),
                };
                (sig, w[k.bit() as usize])
            })
            .collect(),
        _ => vec![(
            RecordSignature {
                in_channel: r.in_channel,
                out_channel: r.out_channel,
                beables,
            },
            1.0,
        )],
    }
}

/// Share of records by which settings their beables line up with.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AlignmentFractions {
    pub left_only: f64,
    pub right_only: f64,
    pub both: f64,
    pub none: f64,
}

impl AlignmentFractions {
    /// Records with some beable lined up with the left setting.
    pub fn left(&self) -> f64 {
        self.left_only + self.both
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Symmetric,
    Asymmetric,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub model: ModelId,
    pub sigma_a: Angle,
    pub sigma_b: Angle,
    pub n: u64,
    pub tv_distance: f64,
    pub threshold: f64,
    pub symmetric: bool,
    pub verdict: Verdict,
    /// Accuracy of the "beable lines up with the left setting means
    /// forwards" classifier on reversed vs forward records; ½ when blind.
    pub distinguisher_score: f64,
    pub forward_alignment: AlignmentFractions,
    pub reversed_alignment: AlignmentFractions,
    /// Every reversed slot pattern also occurs among forward records.
    pub family_closed: bool,
    pub degenerate_settings: bool,
    pub convention_dependent: bool,
}

/// Slot pattern used for the family check. A weighted record counts as
/// "one definite channel plus branch weights" whichever side it sits on.
fn family_pattern(r: &ExperimentRecord) -> SlotPattern {
    if r.weights.is_some() {
        SlotPattern {
            in_channel: r.in_channel.is_some() || r.out_channel.is_some(),
            tau_l: false,
            tau_r: false,
            out_channel: false,
            weights: true,
        }
    } else {
        r.slot_pattern()
    }
}

/// Counts gathered over one ensemble.
#[derive(Debug, Default, Clone)]
struct EnsembleSummary {
    mass: BTreeMap<RecordSignature, f64>,
    // left_only, right_only, both, none
    alignment: [u64; 4],
    patterns: BTreeSet<SlotPattern>,
    records: u64,
}

impl EnsembleSummary {
    fn add(&mut self, r: &ExperimentRecord) {
        for (sig, m) in record_signature(r) {
            *self.mass.entry(sig).or_insert(0.0) += m;
        }
        // weighted records keep no beables under the reversal convention
        let beables = if r.weights.is_some() {
            [None, None]
        } else {
            [r.tau_l, r.tau_r]
        };
        let aligns: Vec<Alignment> = beables
            .into_iter()
            .flatten()
            .map(|t| Alignment::of(t, r.sigma_l, r.sigma_r))
            .collect();
        let left = aligns.iter().any(|a| a.touches_left());
        let right = aligns.iter().any(|a| a.touches_right());
        let slot = match (left, right) {
            (true, false) => 0,
            (false, true) => 1,
            (true, true) => 2,
            (false, false) => 3,
        };
        self.alignment[slot] += 1;
        self.patterns.insert(family_pattern(r));
        self.records += 1;
    }

    fn merge(&mut self, other: EnsembleSummary) {
        for (k, v) in other.mass {
            *self.mass.entry(k).or_insert(0.0) += v;
        }
        for i in 0..4 {
            self.alignment[i] += other.alignment[i];
        }
        self.patterns.extend(other.patterns);
        self.records += other.records;
    }

    fn distribution(&self) -> BTreeMap<RecordSignature, f64> {
        let total: f64 = self.mass.values().sum();
        self.mass
            .iter()
            .map(|(k, v)| (k.clone(), v / total))
            .collect()
    }

    fn fractions(&self) -> AlignmentFractions {
        let n = self.records.max(1) as f64;
        AlignmentFractions {
            left_only: self.alignment[0] as f64 / n,
            right_only: self.alignment[1] as f64 / n,
            both: self.alignment[2] as f64 / n,
            none: self.alignment[3] as f64 / n,
        }
    }
}

fn summarize(
    config: &TrajectoryConfig,
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    n: u64,
    stream: RandomStream,
    reversed: bool,
) -> Result<EnsembleSummary> {
    let chunks = n.div_ceil(CHUNK_LEN);
    // Chunk summaries are folded in index order so float sums do not depend
    // on thread scheduling.
    let parts: Vec<Result<EnsembleSummary>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream.fork(chunk).rng();
            let mut s = EnsembleSummary::default();
            for _ in 0..CHUNK_LEN.min(n - chunk * CHUNK_LEN) {
                let r = simulate_record_with(config, model, sigma_l, sigma_r, &mut rng)?;
                s.add(&if reversed { reverse_record(&r) } else { r });
            }
            Ok(s)
        })
        .collect();
    let mut total = EnsembleSummary::default();
    for p in parts {
        total.merge(p?);
    }
    Ok(total)
}

/// Whether `σ_a − σ_b ∈ {0, π/2} (mod π)`.
pub fn degenerate_settings(sigma_a: Angle, sigma_b: Angle) -> bool {
    sigma_a.aligned_with(sigma_b)
}

pub fn audit_symmetry(
    model: ModelId,
    sigma_a: Angle,
    sigma_b: Angle,
    n: u64,
    stream: RandomStream,
) -> Result<SymmetryReport> {
    audit_symmetry_with(
        &TrajectoryConfig::default(),
        model,
        sigma_a,
        sigma_b,
        n,
        stream,
    )
}

/// Compares `n` reversed records simulated at `(σ_a, σ_b)` with `n` forward
/// records simulated at `(σ_b, σ_a)`.
pub fn audit_symmetry_with(
    config: &TrajectoryConfig,
    model: ModelId,
    sigma_a: Angle,
    sigma_b: Angle,
    n: u64,
    stream: RandomStream,
) -> Result<SymmetryReport> {
    if n < MIN_AUDIT_N {
        return Err(LabError::InvalidInput(format!(
            "audit needs at least {MIN_AUDIT_N} records, got {n}"
        )));
    }
    let reversed = summarize(config, model, sigma_a, sigma_b, n, stream.fork(0), true)?;
    let forward = summarize(config, model, sigma_b, sigma_a, n, stream.fork(1), false)?;

    let tv = crate::stats::tv_distance_keyed(&reversed.distribution(), &forward.distribution())?;
    let threshold = empirical_tv_threshold(n);
    let fwd = forward.fractions();
    let rev = reversed.fractions();
    let score = (0.5 + 0.5 * (fwd.left() - rev.left())).clamp(0.0, 1.0);
    let family_closed = reversed.patterns.is_subset(&forward.patterns);

    let statistically_asymmetric = tv > threshold || (score - 0.5).abs() > threshold;
    let verdict = if statistically_asymmetric {
        Verdict::Asymmetric
    } else if !family_closed {
        Verdict::Inconclusive
    } else {
        Verdict::Symmetric
    };
    Ok(SymmetryReport {
        model,
        sigma_a,
        sigma_b,
        n,
        tv_distance: tv,
        threshold,
        symmetric: verdict == Verdict::Symmetric,
        verdict,
        distinguisher_score: score,
        forward_alignment: fwd,
        reversed_alignment: rev,
        family_closed,
        degenerate_settings: degenerate_settings(sigma_a, sigma_b),
        convention_dependent: model == ModelId::QmNoCollapse,
    })
}

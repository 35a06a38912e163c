//! Control games on both sides of the apparatus.
//!
//! On the left, Lena picks `σ_L` and a Demon who knows it feeds the cube
//! whatever inputs it likes. Lena's control over the emerging polarization
//! `τ_L` is whatever the Demon cannot take away. On the right, Rena picks
//! `σ_R` and Nature picks the outcome. Under discreteness both sisters pin
//! their beable to a pair `{σ, σ + π/2}`, so they control it modulo `π/2`.
//! With continuous inputs (classical fields, superpositions) or outcomes
//! (branch weights) nothing is pinned.
//!
//! [`tsar_check`] runs the whole argument over every built-in model
//! configuration: realism, time symmetry and discreteness together must come
//! with retrocausal control and settings-dependent past beables.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::algebra::{pol_angle, Angle};
use crate::audit::{audit_symmetry_with, SymmetryReport, Verdict};
use crate::error::{LabError, Result};
use crate::hvmodels::{settings_dependence_with, RetroReport};
use crate::model::{Channel, ModelId};
use crate::optics::{demon_inputs_classical, pbs_combine, ModePair};
use crate::photon::{
    channel_axis, demon_inputs_superposition, emerging_state, emit_from_channel, CollapsePreBeable,
    OntologyMode, TrajectoryConfig,
};
use crate::stats::RandomStream;

/// Allowed deviation of a superposed input from unit total intensity.
const UNIT_INTENSITY_TOL: f64 = 1e-9;

type FieldMap = Arc<dyn Fn(Angle) -> Option<ModePair> + Send + Sync>;
type ChannelMap = Arc<dyn Fn(Angle) -> Option<Channel> + Send + Sync>;

/// What the Demon feeds into the left cube, as a function of `σ_L`.
/// Returning `None` means refusing to send anything.
#[derive(Clone)]
pub enum DemonStrategy {
    ClassicalField(FieldMap),
    DiscreteChannel(ChannelMap),
    /// Single-photon superposed input; must have unit total intensity.
    Superposition(FieldMap),
}

impl DemonStrategy {
    pub fn always(channel: Channel) -> Self {
        DemonStrategy::DiscreteChannel(Arc::new(move |_| Some(channel)))
    }

    pub fn discrete<F>(f: F) -> Self
    where
        F: Fn(Angle) -> Option<Channel> + Send + Sync + 'static,
    {
        DemonStrategy::DiscreteChannel(Arc::new(f))
    }

    /// Classical unit-intensity inputs aimed at `target`.
    pub fn classical_target(target: Angle) -> Self {
        DemonStrategy::ClassicalField(Arc::new(move |sigma_l| {
            demon_inputs_classical(sigma_l, target, 1.0).ok()
        }))
    }

    pub fn superposition_target(target: Angle) -> Self {
        DemonStrategy::Superposition(Arc::new(move |sigma_l| {
            Some(demon_inputs_superposition(sigma_l, target))
        }))
    }

    pub fn refusing() -> Self {
        DemonStrategy::DiscreteChannel(Arc::new(|_| None))
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, DemonStrategy::DiscreteChannel(_))
    }
}

impl fmt::Debug for DemonStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            DemonStrategy::ClassicalField(_) => "ClassicalField",
            DemonStrategy::DiscreteChannel(_) => "DiscreteChannel",
            DemonStrategy::Superposition(_) => "Superposition",
        };
        write!(f, "DemonStrategy::{kind}(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LenaOutcome {
    Emitted(Angle),
    /// The Demon refused to play.
    NoPhoton,
}

impl LenaOutcome {
    pub fn tau(self) -> Option<Angle> {
        match self {
            LenaOutcome::Emitted(t) => Some(t),
            LenaOutcome::NoPhoton => None,
        }
    }
}

/// One round of Lena vs. the Demon at setting `sigma_l`.
pub fn play_lena_round(sigma_l: Angle, demon: &DemonStrategy) -> Result<LenaOutcome> {
    match demon {
        DemonStrategy::DiscreteChannel(f) => Ok(match f(sigma_l) {
            Some(c) => LenaOutcome::Emitted(emit_from_channel(c, sigma_l).polarization()?),
            None => LenaOutcome::NoPhoton,
        }),
        DemonStrategy::ClassicalField(f) => {
            let Some(inputs) = f(sigma_l) else {
                return Ok(LenaOutcome::NoPhoton);
            };
            let beam = pbs_combine(&inputs)?;
            if beam.intensity() == 0.0 {
                return Ok(LenaOutcome::NoPhoton);
            }
            Ok(LenaOutcome::Emitted(pol_angle(&beam)?))
        }
        DemonStrategy::Superposition(f) => {
            let Some(inputs) = f(sigma_l) else {
                return Ok(LenaOutcome::NoPhoton);
            };
            let total = inputs.total_intensity();
            if (total - 1.0).abs() > UNIT_INTENSITY_TOL {
                return Err(LabError::InvalidInput(format!(
                    "superposed input must have unit intensity, got {total}"
                )));
            }
            Ok(LenaOutcome::Emitted(
                emerging_state(&inputs)?.polarization()?,
            ))
        }
    }
}

/// What kind of inputs the Demon has to work with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Classical,
    Quantum(OntologyMode),
}

/// The beable values one side can end up with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AchievableSet {
    /// `b = a + π/2 (mod π)`.
    DiscretePair(Angle, Angle),
    AllAngles,
}

impl AchievableSet {
    fn pair(a: Angle, b: Angle) -> Result<Self> {
        if !b.approx_eq(a.perpendicular()) {
            return Err(LabError::InvalidInput(format!(
                "{a} and {b} are not orthogonal"
            )));
        }
        Ok(AchievableSet::DiscretePair(a, b))
    }

    pub fn contains(&self, tau: Angle) -> bool {
        match *self {
            AchievableSet::DiscretePair(a, b) => tau.approx_eq(a) || tau.approx_eq(b),
            AchievableSet::AllAngles => true,
        }
    }

    /// Same set up to ordering, within angle tolerance.
    pub fn approx_eq(&self, other: &AchievableSet) -> bool {
        match (*self, *other) {
            (AchievableSet::DiscretePair(a, b), AchievableSet::DiscretePair(..)) => {
                other.contains(a) && other.contains(b)
            }
            (AchievableSet::AllAngles, AchievableSet::AllAngles) => true,
            _ => false,
        }
    }

    pub fn disjoint(&self, other: &AchievableSet) -> bool {
        match (*self, *other) {
            (AchievableSet::DiscretePair(a, b), AchievableSet::DiscretePair(..)) => {
                !other.contains(a) && !other.contains(b)
            }
            _ => false,
        }
    }
}

impl Serialize for AchievableSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            AchievableSet::DiscretePair(a, b) => [a.radians(), b.radians()].serialize(s),
            AchievableSet::AllAngles => s.serialize_str("all"),
        }
    }
}

/// Which polarization values Lena can end up with, whatever the Demon does.
///
/// With `discreteness` the Demon may only send one photon on one channel;
/// both choices are played out. Otherwise any target is reachable, by
/// classical fields or by superposed inputs depending on `regime`.
pub fn achievable_taus(
    sigma_l: Angle,
    regime: Regime,
    discreteness: bool,
) -> Result<AchievableSet> {
    if discreteness {
        let [a, b] = Channel::BOTH.map(|c| play_lena_round(sigma_l, &DemonStrategy::always(c)));
        let (a, b) = (a?.tau(), b?.tau());
        return AchievableSet::pair(a.expect("photon sent"), b.expect("photon sent"));
    }
    // Both continuous regimes reach every target; see `witness_strategy`.
    let _ = regime;
    Ok(AchievableSet::AllAngles)
}

/// A non-discrete strategy that makes Lena's photon leave at `target`.
pub fn witness_strategy(regime: Regime, target: Angle) -> DemonStrategy {
    match regime {
        Regime::Classical => DemonStrategy::classical_target(target),
        Regime::Quantum(_) => DemonStrategy::superposition_target(target),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlReport {
    pub side: Side,
    pub setting: Angle,
    pub achievable: AchievableSet,
    /// `Some(π/2)` when the beable is pinned to a pair, `None` otherwise.
    #[serde(serialize_with = "control_mod_str")]
    pub control_mod: Option<f64>,
}

fn control_mod_str<S: Serializer>(m: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(if m.is_some() { "pi/2" } else { "none" })
}

impl ControlReport {
    fn new(side: Side, setting: Angle, achievable: AchievableSet) -> Self {
        let control_mod = match achievable {
            AchievableSet::DiscretePair(..) => Some(FRAC_PI_2),
            AchievableSet::AllAngles => None,
        };
        ControlReport {
            side,
            setting,
            achievable,
            control_mod,
        }
    }

    /// Same report apart from the side tag.
    pub fn mirrors(&self, other: &ControlReport) -> bool {
        self.setting.approx_eq(other.setting)
            && self.achievable.approx_eq(&other.achievable)
            && self.control_mod == other.control_mod
    }
}

pub fn lena_control(sigma_l: Angle, regime: Regime, discreteness: bool) -> Result<ControlReport> {
    Ok(ControlReport::new(
        Side::Left,
        sigma_l,
        achievable_taus(sigma_l, regime, discreteness)?,
    ))
}

/// Values of the last beable before the right cube that are compatible with
/// setting `sigma_r`, whatever Nature picks.
fn right_achievable(
    config: &TrajectoryConfig,
    sigma_r: Angle,
    mode: OntologyMode,
) -> Result<AchievableSet> {
    let pinned = match mode {
        OntologyMode::DiscreteSymmetric => true,
        OntologyMode::Collapse => config.collapse_pre_beable == CollapsePreBeable::Eigenstate,
        // Nature spreads any ρ continuously over branch weights.
        OntologyMode::NoCollapse => false,
    };
    if !pinned {
        return Ok(AchievableSet::AllAngles);
    }
    let [a, b] = Channel::BOTH.map(|out| channel_axis(out, sigma_r));
    AchievableSet::pair(a, b)
}

pub fn rena_control(
    config: &TrajectoryConfig,
    sigma_r: Angle,
    mode: OntologyMode,
) -> Result<ControlReport> {
    Ok(ControlReport::new(
        Side::Right,
        sigma_r,
        right_achievable(config, sigma_r, mode)?,
    ))
}

/// Rena's control at `σ_R` compared with the counterfactual `σ_R + ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenaControl {
    pub rho: f64,
    pub base: ControlReport,
    pub shifted: ControlReport,
    /// The achievable pairs at `σ_R` and `σ_R + ρ` are disjoint.
    pub shift_detected: bool,
    /// Output-independent control over the pre-measurement beable, mod π/2.
    pub retro_control: bool,
}

pub fn verify_rena_control(sigma_r: Angle, rho: f64, mode: OntologyMode) -> Result<RenaControl> {
    verify_rena_control_with(&TrajectoryConfig::default(), sigma_r, rho, mode)
}

pub fn verify_rena_control_with(
    config: &TrajectoryConfig,
    sigma_r: Angle,
    rho: f64,
    mode: OntologyMode,
) -> Result<RenaControl> {
    if !rho.is_finite() {
        return Err(LabError::InvalidInput(format!(
            "offset must be finite, got {rho}"
        )));
    }
    let base = rena_control(config, sigma_r, mode)?;
    let shifted = rena_control(config, sigma_r.offset(rho), mode)?;
    Ok(RenaControl {
        rho,
        base,
        shifted,
        shift_detected: base.achievable.disjoint(&shifted.achievable),
        retro_control: base.control_mod.is_some(),
    })
}

/// A model together with the trajectory options it is run under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelConfig {
    pub model: ModelId,
    pub trajectory: TrajectoryConfig,
}

/// Every built-in model, plus the collapse model with an eigenstate beable.
pub fn builtin_configurations() -> Vec<ModelConfig> {
    let mut out: Vec<ModelConfig> = ModelId::ALL
        .into_iter()
        .map(|model| ModelConfig {
            model,
            trajectory: TrajectoryConfig::default(),
        })
        .collect();
    out.push(ModelConfig {
        model: ModelId::QmCollapse,
        trajectory: TrajectoryConfig {
            collapse_pre_beable: CollapsePreBeable::Eigenstate,
            ..TrajectoryConfig::default()
        },
    });
    out
}

/// Right-side control of a model configuration. The hidden-variable models
/// pin their future bit to the output channel, which plays the part of
/// `τ_R`; classical fields split continuously.
pub fn model_rena_control(cfg: &ModelConfig, sigma_r: Angle, rho: f64) -> Result<RenaControl> {
    let mode = match cfg.model {
        ModelId::TwoBit | ModelId::OneBit => OntologyMode::DiscreteSymmetric,
        ModelId::Classical => OntologyMode::NoCollapse,
        m => m.ontology().expect("qm model"),
    };
    verify_rena_control_with(&cfg.trajectory, sigma_r, rho, mode)
}

/// Outputs are definite channels (one per cube).
pub fn is_discrete(model: ModelId) -> bool {
    !matches!(model, ModelId::Classical | ModelId::QmNoCollapse)
}

/// Every built-in model assigns the system definite intermediate beables.
pub fn is_realist(_model: ModelId) -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsarCase {
    pub config: ModelConfig,
    pub realism: bool,
    pub time_symmetric: bool,
    pub discreteness: bool,
    pub control: RenaControl,
    pub retro: RetroReport,
    pub audit: SymmetryReport,
    /// The case agrees with "realism ∧ time symmetry ∧ discreteness ⇒
    /// retrocausality" and with its converse on this model family.
    pub consistent: bool,
}

impl TsarCase {
    pub fn premises_hold(&self) -> bool {
        self.realism && self.time_symmetric && self.discreteness
    }
}

/// Settings used by [`tsar_check`]: a non-degenerate pair and an alternative
/// right setting.
pub const TSAR_SIGMA_L: f64 = 0.0;
pub const TSAR_SIGMA_R: f64 = FRAC_PI_6;
pub const TSAR_SIGMA_R_ALT: f64 = FRAC_PI_3;

/// Checks one configuration. Time symmetry is decided by an audit of `n`
/// records per ensemble.
pub fn tsar_case(cfg: &ModelConfig, n: u64, stream: RandomStream) -> Result<TsarCase> {
    let sl = Angle::new(TSAR_SIGMA_L)?;
    let sr = Angle::new(TSAR_SIGMA_R)?;
    let alt = Angle::new(TSAR_SIGMA_R_ALT)?;
    let audit = audit_symmetry_with(&cfg.trajectory, cfg.model, sl, sr, n, stream)?;
    let retro = settings_dependence_with(&cfg.trajectory, cfg.model, sl, sr, alt)?;
    let control = model_rena_control(cfg, sr, alt.diff(sr))?;
    let realism = is_realist(cfg.model);
    let time_symmetric = audit.verdict == Verdict::Symmetric;
    let discreteness = is_discrete(cfg.model);
    let consistent = if realism && time_symmetric && discreteness {
        control.retro_control && control.shift_detected && retro.retro
    } else {
        !retro.retro || !time_symmetric
    };
    Ok(TsarCase {
        config: *cfg,
        realism,
        time_symmetric,
        discreteness,
        control,
        retro,
        audit,
        consistent,
    })
}

pub fn tsar_check(n: u64, stream: RandomStream) -> Result<Vec<TsarCase>> {
    builtin_configurations()
        .iter()
        .enumerate()
        .map(|(i, cfg)| tsar_case(cfg, n, stream.fork(i as u64)))
        .collect()
}

//! Subcommand bodies. Each returns the rendered payload and an exit code.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use retrolab::audit::{audit_symmetry_with, simulate_record_with, SymmetryReport, Verdict};
use retrolab::games::{
    lena_control, verify_rena_control_with, witness_strategy, ControlReport, Regime, RenaControl,
};
use retrolab::hvmodels::{
    onebit_dist, qm_reference_joint, settings_dependence_empirical, settings_dependence_with,
    twobit_dist, HVJoint, RetroReport,
};
use retrolab::model::Channel;
use retrolab::photon::{OntologyMode, TrajectoryConfig};
use retrolab::stats::{for_each_draw, tv_distance, wilson_interval, RandomStream, CHUNK_LEN};
use retrolab::{Angle, ModelId};
use serde::Serialize;

use crate::config::{CollapseBeable, Format, Resolved};
use crate::CliError;

pub struct Output {
    pub text: String,
    pub exit: u8,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a Resolved,
    result: &'a T,
}

fn render_json<T: Serialize>(
    command: &'static str,
    cfg: &Resolved,
    result: &T,
) -> Result<String, CliError> {
    let env = Envelope {
        tool: "retrolab",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// `# key=value` lines carrying the resolved config ahead of a CSV body.
fn csv_preamble(command: &str, cfg: &Resolved) -> Result<String, CliError> {
    let value = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let mut s = format!(
        "# tool=retrolab version={} command={command}\n",
        env!("CARGO_PKG_VERSION")
    );
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let v = match v {
                serde_json::Value::String(x) => x,
                other => other.to_string(),
            };
            s.push_str(&format!("# {k}={v}\n"));
        }
    }
    Ok(s)
}

fn json_only(cfg: &Resolved, command: &str) -> Result<(), CliError> {
    if cfg.format == Format::Csv {
        return Err(CliError::Config(format!("{command} output is JSON only")));
    }
    Ok(())
}

fn lab(e: retrolab::LabError) -> CliError {
    CliError::Config(e.to_string())
}

/// Joint law of (input channel, output channel) for a model with channels.
pub fn analytic_joint(model: ModelId, sigma_l: Angle, sigma_r: Angle) -> Result<HVJoint, CliError> {
    Ok(match model {
        ModelId::TwoBit => twobit_dist(sigma_l, sigma_r),
        ModelId::OneBit => {
            let same = onebit_dist(sigma_l, sigma_r);
            HVJoint::from_array([
                0.5 * same,
                0.5 * (1.0 - same),
                0.5 * (1.0 - same),
                0.5 * same,
            ])
        }
        ModelId::QmDiscrete | ModelId::QmCollapse | ModelId::QmNoCollapse => {
            qm_reference_joint(sigma_l, sigma_r)
        }
        ModelId::Classical => {
            return Err(CliError::Config(
                "the classical model has no channel statistics; use audit or retro".into(),
            ))
        }
    })
}

/// Values keyed by `"<in><out>"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cells<T> {
    #[serde(rename = "00")]
    pub c00: T,
    #[serde(rename = "01")]
    pub c01: T,
    #[serde(rename = "10")]
    pub c10: T,
    #[serde(rename = "11")]
    pub c11: T,
}

impl<T: Copy> Cells<T> {
    fn from_array(a: [T; 4]) -> Self {
        Cells {
            c00: a[0],
            c01: a[1],
            c10: a[2],
            c11: a[3],
        }
    }

    fn as_array(&self) -> [T; 4] {
        [self.c00, self.c01, self.c10, self.c11]
    }
}

fn cell_index(input: Channel, output: Channel) -> usize {
    2 * input.bit() as usize + output.bit() as usize
}

/// Mass per (in, out) cell over `n` simulated records. Branch weights are
/// spread over the absent output channel.
fn simulate_joint(
    traj: &TrajectoryConfig,
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    n: u64,
    stream: RandomStream,
) -> Result<[f64; 4], CliError> {
    let chunks = n.div_ceil(CHUNK_LEN);
    let parts: Vec<Result<[f64; 4], CliError>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream.fork(chunk).rng();
            let mut mass = [0.0; 4];
            for _ in 0..CHUNK_LEN.min(n - chunk * CHUNK_LEN) {
                let r =
                    simulate_record_with(traj, model, sigma_l, sigma_r, &mut rng).map_err(lab)?;
                let input = r.in_channel.expect("model has channels");
                match (r.out_channel, r.weights) {
                    (Some(out), _) => mass[cell_index(input, out)] += 1.0,
                    (None, Some(w)) => {
                        for out in Channel::BOTH {
                            mass[cell_index(input, out)] += w[out.bit() as usize];
                        }
                    }
                    (None, None) => unreachable!("record without output"),
                }
            }
            Ok(mass)
        })
        .collect();
    let mut total = [0.0; 4];
    for p in parts {
        let p = p?;
        for i in 0..4 {
            total[i] += p[i];
        }
    }
    Ok(total)
}

fn write_records(
    path: &Path,
    traj: &TrajectoryConfig,
    model: ModelId,
    sigma_l: Angle,
    sigma_r: Angle,
    n: u64,
    stream: RandomStream,
) -> Result<(), CliError> {
    let file =
        File::create(path).map_err(|e| CliError::Write(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let mut err: Option<CliError> = None;
    for_each_draw(n, stream, |rng| {
        if err.is_some() {
            return;
        }
        let line = simulate_record_with(traj, model, sigma_l, sigma_r, rng)
            .map_err(lab)
            .and_then(|r| serde_json::to_string(&r).map_err(|e| CliError::Config(e.to_string())));
        match line {
            Ok(l) => {
                if let Err(e) = writeln!(w, "{l}") {
                    err = Some(CliError::Write(format!("{}: {e}", path.display())));
                }
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    w.flush()
        .map_err(|e| CliError::Write(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct PMatch {
    empirical: f64,
    analytic: f64,
    /// Wilson 95% interval; absent for weighted (no-collapse) tallies.
    #[serde(skip_serializing_if = "Option::is_none")]
    wilson_95: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct RunResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<Cells<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<Cells<f64>>,
    empirical: Cells<f64>,
    analytic: Cells<f64>,
    tv_to_analytic: f64,
    p_match: PMatch,
}

pub fn run(cfg: &Resolved) -> Result<Output, CliError> {
    let model = cfg.model()?;
    let (sl, sr) = (cfg.sigma_l_or_zero(), cfg.sigma_r_or_zero());
    let analytic = analytic_joint(model, sl, sr)?.as_array();
    let traj = cfg.trajectory();
    let stream = RandomStream::from_seed(cfg.seed);
    let mass = simulate_joint(&traj, model, sl, sr, cfg.n, stream)?;
    if let Some(path) = &cfg.records {
        write_records(path, &traj, model, sl, sr, cfg.n, stream)?;
    }
    let total: f64 = mass.iter().sum();
    let empirical = mass.map(|m| m / total);
    let tv = tv_distance(&empirical, &analytic).map_err(lab)?;
    let weighted = model == ModelId::QmNoCollapse;
    let counts = (!weighted).then(|| Cells::from_array(mass.map(|m| m as u64)));
    let wilson_95 = counts.map(|c| {
        let (lo, hi) = wilson_interval(c.c00 + c.c11, cfg.n, 1.96);
        [lo, hi]
    });
    let result = RunResult {
        counts,
        mass: weighted.then(|| Cells::from_array(mass)),
        empirical: Cells::from_array(empirical),
        analytic: Cells::from_array(analytic),
        tv_to_analytic: tv,
        p_match: PMatch {
            empirical: empirical[0] + empirical[3],
            analytic: analytic[0] + analytic[3],
            wilson_95,
        },
    };
    let text = match cfg.format {
        Format::Json => render_json("run", cfg, &result)?,
        Format::Csv => {
            let mut s = csv_preamble("run", cfg)?;
            s.push_str("in_channel,out_channel,mass,empirical,analytic\n");
            for (i, ((m, e), a)) in mass.iter().zip(empirical).zip(analytic).enumerate() {
                s.push_str(&format!("{},{},{m:?},{e:?},{a:?}\n", i >> 1, i & 1));
            }
            s
        }
    };
    Ok(Output { text, exit: 0 })
}

#[derive(Serialize)]
struct TableRow {
    sigma_l: Angle,
    sigma_r: Angle,
    joint: Cells<f64>,
    p_match: f64,
}

/// Analytic joints at the requested settings, or over `σ_R = σ_L + kπ/12`
/// for `k = 0..=6` when no right setting is given.
pub fn table(cfg: &Resolved) -> Result<Output, CliError> {
    let model = cfg.model()?;
    let sl = cfg.sigma_l_or_zero();
    let settings: Vec<Angle> = match cfg.sigma_r {
        Some(sr) => vec![sr],
        None => (0..=6)
            .map(|k| sl.offset(k as f64 * std::f64::consts::PI / 12.0))
            .collect(),
    };
    let rows = settings
        .into_iter()
        .map(|sr| {
            let j = analytic_joint(model, sl, sr)?;
            Ok(TableRow {
                sigma_l: sl,
                sigma_r: sr,
                joint: Cells::from_array(j.as_array()),
                p_match: j.match_probability(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let text = match cfg.format {
        Format::Json => render_json("table", cfg, &rows)?,
        Format::Csv => {
            let mut s = csv_preamble("table", cfg)?;
            s.push_str("sigma_l,sigma_r,p00,p01,p10,p11,p_match\n");
            for r in &rows {
                let [a, b, c, d] = r.joint.as_array();
                s.push_str(&format!(
                    "{:?},{:?},{a:?},{b:?},{c:?},{d:?},{:?}\n",
                    r.sigma_l.radians(),
                    r.sigma_r.radians(),
                    r.p_match
                ));
            }
            s
        }
    };
    Ok(Output { text, exit: 0 })
}

pub fn audit(cfg: &Resolved) -> Result<Output, CliError> {
    json_only(cfg, "audit")?;
    let model = cfg.model()?;
    let sa = cfg.require(cfg.sigma_l, "sigma_a")?;
    let sb = cfg.require(cfg.sigma_r, "sigma_b")?;
    let report: SymmetryReport = audit_symmetry_with(
        &cfg.trajectory(),
        model,
        sa,
        sb,
        cfg.n,
        RandomStream::from_seed(cfg.seed),
    )
    .map_err(lab)?;
    let exit = match report.verdict {
        Verdict::Symmetric => 0,
        Verdict::Asymmetric => 1,
        Verdict::Inconclusive => 4,
    };
    Ok(Output {
        text: render_json("audit", cfg, &report)?,
        exit,
    })
}

pub fn retro(cfg: &Resolved, empirical: bool) -> Result<Output, CliError> {
    json_only(cfg, "retro")?;
    let model = cfg.model()?;
    let sl = cfg.require(cfg.sigma_l, "sigma_l")?;
    let sr = cfg.require(cfg.sigma_r, "sigma_r")?;
    let alt = cfg.require(cfg.sigma_r_alt, "sigma_r_alt")?;
    let report: RetroReport = if empirical {
        if cfg.collapse_beable != CollapseBeable::Prepared {
            return Err(CliError::Config(
                "the empirical test runs with the default collapse beable only".into(),
            ));
        }
        settings_dependence_empirical(model, sl, sr, alt, cfg.n, RandomStream::from_seed(cfg.seed))
    } else {
        settings_dependence_with(&cfg.trajectory(), model, sl, sr, alt)
    }
    .map_err(lab)?;
    Ok(Output {
        text: render_json("retro", cfg, &report)?,
        exit: report.retro as u8,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemonKind {
    Discrete,
    Classical,
    Superposition,
}

#[derive(Serialize)]
struct RightGame {
    #[serde(flatten)]
    base: ControlReport,
    rho: f64,
    shifted_achievable: retrolab::games::AchievableSet,
    shift_detected: bool,
    retro_control: bool,
}

impl From<RenaControl> for RightGame {
    fn from(c: RenaControl) -> Self {
        RightGame {
            base: c.base,
            rho: c.rho,
            shifted_achievable: c.shifted.achievable,
            shift_detected: c.shift_detected,
            retro_control: c.retro_control,
        }
    }
}

#[derive(Serialize)]
struct LeftGame {
    #[serde(flatten)]
    base: ControlReport,
    /// A strategy check: the continuous witness reaching `setting + 0.1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    witness_tau: Option<Angle>,
}

pub fn game_left(cfg: &Resolved, setting: Angle, demon: DemonKind) -> Result<Output, CliError> {
    json_only(cfg, "game")?;
    let (regime, discrete) = match demon {
        DemonKind::Discrete => (Regime::Quantum(OntologyMode::DiscreteSymmetric), true),
        DemonKind::Classical => (Regime::Classical, false),
        DemonKind::Superposition => (Regime::Quantum(OntologyMode::DiscreteSymmetric), false),
    };
    let base = lena_control(setting, regime, discrete).map_err(lab)?;
    let witness_tau = if discrete {
        None
    } else {
        let target = setting.offset(0.1);
        retrolab::games::play_lena_round(setting, &witness_strategy(regime, target))
            .map_err(lab)?
            .tau()
    };
    Ok(Output {
        text: render_json("game", cfg, &LeftGame { base, witness_tau })?,
        exit: 0,
    })
}

pub fn game_right(
    cfg: &Resolved,
    setting: Angle,
    rho: f64,
    mode: OntologyMode,
) -> Result<Output, CliError> {
    json_only(cfg, "game")?;
    let c = verify_rena_control_with(&cfg.trajectory(), setting, rho, mode).map_err(lab)?;
    Ok(Output {
        text: render_json("game", cfg, &RightGame::from(c))?,
        exit: 0,
    })
}

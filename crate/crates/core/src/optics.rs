//! Classical model of an ideal polarizing cube.
//!
//! The cube at setting `σ` is a lossless two-mode map: the transmission mode
//! (channel 1) carries polarization `σ` along `(cos σ, sin σ)`, the
//! reflection mode (channel 0) carries `σ + π/2` along `(−sin σ, cos σ)`.
//! Reflection adds no phase. Running the cube backwards
//! (two input modes combined into one beam) is the exact inverse.

use crate::algebra::{jones_from_angle, Angle, ComplexAmp, JonesVector};
use crate::error::{LabError, Result};

/// Relative tolerance for the mode-pair polarization invariant.
const MODE_TOL: f64 = 1e-9;

/// The two spatial modes on one side of a cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePair {
    /// Transmission mode (`R = 1` / `L = 1`), polarized along `basis`.
    pub trans: JonesVector,
    /// Reflection mode (`R = 0` / `L = 0`), polarized along `basis + π/2`.
    pub refl: JonesVector,
    pub basis: Angle,
}

impl ModePair {
    /// Builds a pair from scalar mode amplitudes.
    pub fn from_amplitudes(basis: Angle, trans: ComplexAmp, refl: ComplexAmp) -> Self {
        ModePair {
            trans: JonesVector::along(basis, trans),
            refl: JonesVector::along_unit(basis.perp_unit(), refl),
            basis,
        }
    }

    pub fn trans_amplitude(&self) -> ComplexAmp {
        self.trans.project(self.basis)
    }

    pub fn refl_amplitude(&self) -> ComplexAmp {
        self.refl.project_unit(self.basis.perp_unit())
    }

    pub fn total_intensity(&self) -> f64 {
        self.trans.intensity() + self.refl.intensity()
    }

    /// Checks that each mode is polarized along its own axis (or empty).
    pub fn validate(&self) -> Result<()> {
        let scale = self.total_intensity().max(f64::MIN_POSITIVE);
        let stray_trans = self.trans.project_unit(self.basis.perp_unit()).norm_sqr();
        let stray_refl = self.refl.project(self.basis).norm_sqr();
        if stray_trans > MODE_TOL * scale {
            return Err(LabError::InvalidInput(format!(
                "transmission mode has intensity {stray_trans:.3e} off its axis {}",
                self.basis
            )));
        }
        if stray_refl > MODE_TOL * scale {
            return Err(LabError::InvalidInput(format!(
                "reflection mode has intensity {stray_refl:.3e} off its axis {}",
                self.basis.perpendicular()
            )));
        }
        Ok(())
    }
}

/// Splits a beam at a cube set to `sigma`.
pub fn pbs_split(beam: &JonesVector, sigma: Angle) -> ModePair {
    ModePair::from_amplitudes(
        sigma,
        beam.project(sigma),
        beam.project_unit(sigma.perp_unit()),
    )
}

/// Recombines two input modes into the single beam leaving the cube.
pub fn pbs_combine(modes: &ModePair) -> Result<JonesVector> {
    modes.validate()?;
    Ok(modes.trans.add(&modes.refl))
}

/// Inputs a classical Demon feeds a cube at `sigma_l` so that the beam
/// leaving it is linear at `tau_target` with the given intensity.
///
/// These are exactly the outputs a cube at the same setting would produce
/// from that beam, i.e. the split run backwards.
pub fn demon_inputs_classical(
    sigma_l: Angle,
    tau_target: Angle,
    intensity: f64,
) -> Result<ModePair> {
    let beam = jones_from_angle(tau_target, intensity, 0.0)?;
    Ok(pbs_split(&beam, sigma_l))
}

/// Downstream intensities for a classical beam hitting a cube at `sigma_r`:
/// `(transmitted, reflected)`.
pub fn split_intensities(beam: &JonesVector, sigma_r: Angle) -> (f64, f64) {
    let modes = pbs_split(beam, sigma_r);
    (modes.trans.intensity(), modes.refl.intensity())
}

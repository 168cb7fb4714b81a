//! Schrödinger scattering for compactly supported potentials on the line and
//! radial potentials in three dimensions.
//!
//! The 1D scattering matrix is `S(λ) = [[t, r₊], [r₋, t]]` in the basis where
//! the generic threshold value is `[[0, −1], [−1, 0]]`. In three dimensions
//! `S(λ)` is diagonal over partial waves with entries `e^{2iδ_ℓ(λ)}` of
//! multiplicity `2ℓ + 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdet::RdetError;
use crate::sflow::SflowError;
use crate::upath::PathError;

mod bessel;
mod bsdet;
mod levinson;
mod oned;
mod poly;
mod potential;
mod radial;

pub use levinson::{
    integrate_with_tail, levinson_verify, line_densities, radial_densities, radial_abs_trace_integrals, radial_subtracted_integrals,
    AlternativeBookkeeping, Densities, LevinsonReport, LevinsonSpec, PartialIntegral, TailedIntegral, Verdict,
};
pub use bsdet::{birman_schwinger_det_1d, guillope_ratio, BoundaryValue, NystromSpec};

pub use oned::{
    bound_states_1d, resonance_statistic_1d, smatrix_1d, smatrix_1d_threshold, spath_1d, zero_energy_1d,
    ZeroEnergySolution,
};
pub use poly::{h_correction, h_correction_spectrum, high_energy_poly, HighEnergyPoly};
pub use potential::{Potential1D, PotentialSpec, RadialPotential, Segment};
pub use radial::{
    bound_states_radial, bound_states_radial_per_l, phase_shifts_3d, phase_shifts_numerov, resonance_statistics_3d,
    smatrix_radial, PhaseShiftTable, RadialSMatrix, RadialSPath,
};

/// Threshold on the normalized Wronskian / boundedness statistic.
pub const RESONANCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatterError {
    #[error("energy must be positive, got {0}")]
    EnergyNonpositive(f64),
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("bound-state oracles disagree: diagonalization {diagonalization}, node count {nodes}")]
    OracleDisagreement { diagonalization: usize, nodes: usize },
    #[error("resonance statistic {statistic:.3e} lies in the inconclusive band")]
    Inconclusive { statistic: f64 },
    #[error("dimension {0} is not supported")]
    UnsupportedDimension(u32),
    #[error("integrand tail did not converge (estimate {estimate:.3e})")]
    TailNotConverged { estimate: f64 },
    #[error("Levinson routes disagree: {0}")]
    RouteDisagreement(String),
    #[error("Nyström refinement did not stabilize (last change {change:.3e})")]
    QuadratureNotConverged { change: f64 },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("potential file: {0}")]
    Parse(String),
    #[error(transparent)]
    Sflow(#[from] SflowError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Determinant(#[from] RdetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceClass {
    None,
    SResonance,
    ThresholdEigenvalue,
}

/// Maps a normalized statistic to resonant / not, with the inconclusive band `[τ/2, 2τ]`.
pub(crate) fn classify(statistic: f64, tau: f64) -> Result<bool, ScatterError> {
    if statistic < 0.5 * tau {
        Ok(true)
    } else if statistic <= 2.0 * tau {
        Err(ScatterError::Inconclusive { statistic })
    } else {
        Ok(false)
    }
}

/// Zero-energy resonance classification.
///
/// `d = 1`: the Wronskian of the two zero-energy Jost solutions.
/// `d = 3`: the matching coefficient of the growing exterior solution per
/// partial wave; `ℓ = 0` signals an s-resonance, `ℓ ≥ 1` an eigenvalue at 0.
pub fn resonance_detect(
    line: Option<&Potential1D>,
    radial: Option<&RadialPotential>,
    d: u32,
) -> Result<ResonanceClass, ScatterError> {
    match (d, line, radial) {
        (1, Some(v), _) => {
            let s = resonance_statistic_1d(v)?;
            Ok(if classify(s, RESONANCE_TOL)? { ResonanceClass::SResonance } else { ResonanceClass::None })
        }
        (3, _, Some(v)) => {
            let stats = resonance_statistics_3d(v, 4)?;
            if classify(stats[0], RESONANCE_TOL)? {
                return Ok(ResonanceClass::SResonance);
            }
            for &s in &stats[1..] {
                if classify(s, RESONANCE_TOL)? {
                    return Ok(ResonanceClass::ThresholdEigenvalue);
                }
            }
            Ok(ResonanceClass::None)
        }
        (1 | 3, _, _) => Err(ScatterError::InvalidPotential("potential kind does not match the dimension".into())),
        (d, _, _) => Err(ScatterError::UnsupportedDimension(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_bands() {
        assert_eq!(classify(1e-8, RESONANCE_TOL), Ok(true));
        assert_eq!(classify(1e-3, RESONANCE_TOL), Ok(false));
        assert!(matches!(classify(1e-6, RESONANCE_TOL), Err(ScatterError::Inconclusive { .. })));
    }

    #[test]
    fn free_line_is_resonant() {
        let r = resonance_detect(Some(&Potential1D::zero()), None, 1).unwrap();
        assert_eq!(r, ResonanceClass::SResonance);
        let w = Potential1D::square_well(1.0, 1.0).unwrap();
        assert_eq!(resonance_detect(Some(&w), None, 1).unwrap(), ResonanceClass::None);
        assert!(matches!(resonance_detect(Some(&w), None, 2), Err(ScatterError::UnsupportedDimension(2))));
    }
}

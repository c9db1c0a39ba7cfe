//! High-level orchestration shared by the CLI and the verification suite:
//! commensurability handling, reduction to the unit-equilateral graph, and
//! the dual abscissa pipeline.

use crate::coupling::{rescale_to_unit, subdivide_with_couplings, UnitaryCoupling};
use crate::graph::{commensurate_unit, MetricGraph};
use crate::linalg::C64;
use crate::orbits::{
    abscissa_report, characteristic_polynomial, orbit_polynomial, AbscissaPolynomial,
    AbscissaReport, OrbitError,
};
use crate::secular::SecularError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("edge lengths are incommensurate (within cap 10^4 and rel tol 1e-9); the abscissa polynomial is unavailable, numeric spectra still are")]
    Incommensurate,
    #[error("subdivision produces {0} unit edges, beyond the practical polynomial cap of {1}")]
    TooManySubEdges(usize, usize),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Secular(#[from] SecularError),
    #[error(transparent)]
    Coupling(#[from] crate::coupling::CouplingError),
    #[error("orbit and characteristic polynomials disagree: max coefficient deviation {0:.3e}")]
    MethodDisagreement(f64),
}

pub const MAX_SUB_EDGES: usize = 1500;
pub const ORBIT_GUARD: usize = 24;

/// The unit-equilateral reduction of a commensurate graph: subdivide to the
/// common unit l0, then rescale to edge length one. Unit-system eigenvalues
/// are l0 times the original ones; abscissas divide by l0 to map back.
#[derive(Debug, Clone)]
pub struct UnitReduction {
    pub graph: MetricGraph,
    pub couplings: Vec<UnitaryCoupling>,
    pub l0: f64,
}

pub fn reduce_to_unit(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
) -> Result<UnitReduction, PipelineError> {
    let lengths: Vec<f64> = graph.edges().iter().map(|e| e.length).collect();
    let Some(l0) = commensurate_unit(&lengths) else {
        return Err(PipelineError::Incommensurate);
    };
    let total_sub: f64 = lengths.iter().map(|l| (l / l0).round()).sum();
    if total_sub as usize > MAX_SUB_EDGES {
        return Err(PipelineError::TooManySubEdges(
            total_sub as usize,
            MAX_SUB_EDGES,
        ));
    }
    let (sub, sub_couplings, _) = subdivide_with_couplings(graph, couplings, l0)?;
    let (unit, unit_couplings, factor) = rescale_to_unit(&sub, &sub_couplings)?;
    debug_assert!((factor - l0).abs() < 1e-12 * l0.max(1.0));
    Ok(UnitReduction {
        graph: unit,
        couplings: unit_couplings,
        l0,
    })
}

/// Both polynomial constructions plus the clustered report on the unit
/// reduction. The orbit expansion runs only under the combinatorial guard;
/// when both run their coefficients must agree to 1e-9 relative.
#[derive(Debug, Clone)]
pub struct AbscissaPipeline {
    pub reduction: UnitReduction,
    pub characteristic: AbscissaPolynomial,
    pub orbit: Option<AbscissaPolynomial>,
    pub report: AbscissaReport,
    /// max per-coefficient deviation between the methods, when both ran
    pub method_deviation: Option<f64>,
}

/// Per-coefficient deviation in the shared scaled basis, relative to the
/// larger of the pair (absolute floor 1e-12 for structural zeros).
pub fn polynomial_deviation(a: &AbscissaPolynomial, b: &AbscissaPolynomial) -> f64 {
    let mut worst = 0.0f64;
    for (ca, cb) in a.poly.coeffs.iter().zip(b.poly.coeffs.iter()) {
        let scale = ca.norm().max(cb.norm());
        if scale < 1e-12 {
            continue;
        }
        worst = worst.max((ca - cb).norm() / scale.max(1.0));
    }
    worst
}

pub fn abscissa_pipeline(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
    cluster_tol: f64,
) -> Result<AbscissaPipeline, PipelineError> {
    let reduction = reduce_to_unit(graph, couplings)?;
    let characteristic = characteristic_polynomial(&reduction.graph, &reduction.couplings)?;
    let orbit = if 2 * reduction.graph.n_edges() <= ORBIT_GUARD {
        Some(orbit_polynomial(&reduction.graph, &reduction.couplings)?)
    } else {
        None
    };
    let method_deviation = orbit
        .as_ref()
        .map(|o| polynomial_deviation(o, &characteristic));
    if let Some(dev) = method_deviation {
        if dev > 1e-9 {
            return Err(PipelineError::MethodDisagreement(dev));
        }
    }
    let report = abscissa_report(&characteristic, cluster_tol)?;
    Ok(AbscissaPipeline {
        reduction,
        characteristic,
        orbit,
        report,
    method_deviation,
    })
}

impl AbscissaPipeline {
    /// Abscissas of the original graph: unit-system c0 divided by l0.
    pub fn original_scale_clusters(&self) -> Vec<(f64, usize)> {
        self.report
            .clusters
            .iter()
            .map(|c| (c.c / self.reduction.l0, c.multiplicity))
            .collect()
    }

    /// Unit-system c0 roots (complex, principal branch).
    pub fn c0_values(&self) -> &[C64] {
        &self.report.c0_values
    }
}

//! Verification layer: eigenfunction reconstruction, the weighted-average
//! identity for Re(lambda), the mu eigenvalue-distribution measure, and the
//! averaged-coefficient crosscheck.

use crate::linalg::{null_vector, C64};
use crate::rootfinding::{track_sequence, RootError, SequenceFit};
use crate::secular::{lambda_tilde, sample_fundamental_pair, SecularError, SecularSystem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Secular(#[from] SecularError),
    #[error(transparent)]
    Ode(#[from] crate::ode::OdeError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("rayleigh identity needs Im(lambda) != 0, got {0}")]
    RealEigenvalue(C64),
    #[error("eigenvalue coverage incomplete: window count {count} != supplied {supplied}")]
    IncompleteCoverage { count: usize, supplied: usize },
}

/// One reconstructed eigenfunction component on an edge: exact samples of
/// (u, u') at the stored points plus the data to evaluate anywhere.
#[derive(Debug, Clone)]
pub enum EdgeBasis {
    /// u(x) = b1 cosh(lt x) + b2 sinh(lt x)/lt
    Constant { lt: C64, b1: C64, b2: C64 },
    /// exact ODE samples on a fine uniform grid, cubic Hermite in between
    Sampled {
        xs: Vec<f64>,
        u: Vec<C64>,
        du: Vec<C64>,
    },
}

impl EdgeBasis {
    pub fn eval(&self, x: f64) -> (C64, C64) {
        match self {
            EdgeBasis::Constant { lt, b1, b2 } => {
                if lt.norm() == 0.0 {
                    return (*b1 + *b2 * x, *b2);
                }
                let z = lt * x;
                let (ch, sh) = (z.cosh(), z.sinh());
                let u = *b1 * ch + *b2 * sh / lt;
                let du = *b1 * *lt * sh + *b2 * ch;
                (u, du)
            }
            EdgeBasis::Sampled { xs, u, du } => {
                let n = xs.len();
                let mut i = xs.partition_point(|&t| t <= x).saturating_sub(1);
                if i + 1 >= n {
                    i = n - 2;
                }
                let h = xs[i + 1] - xs[i];
                let t = ((x - xs[i]) / h).clamp(0.0, 1.0);
                let h00 = 2.0 * t * t * t - 3.0 * t * t + 1.0;
                let h10 = t * t * t - 2.0 * t * t + t;
                let h01 = -2.0 * t * t * t + 3.0 * t * t;
                let h11 = t * t * t - t * t;
                let uu = u[i] * h00 + du[i] * (h10 * h) + u[i + 1] * h01 + du[i + 1] * (h11 * h);
                let dh00 = (6.0 * t * t - 6.0 * t) / h;
                let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
                let dh01 = (-6.0 * t * t + 6.0 * t) / h;
                let dh11 = 3.0 * t * t - 2.0 * t;
                let duu = u[i] * dh00 + du[i] * dh10 + u[i + 1] * dh01 + du[i + 1] * dh11;
                (uu, duu)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub lambda: C64,
    pub bases: Vec<EdgeBasis>,
    /// L2 norm^2 per edge after global normalization (they sum to 1).
    pub edge_norms_sq: Vec<f64>,
    /// sum ||u'||^2 / sum ||u||^2 (grows like n^2 along a sequence).
    pub derivative_ratio: f64,
    /// smallest-singular-value estimate of the flower matrix at lambda
    pub sigma_min: f64,
    /// max coupling-condition violation over vertices (scaled)
    pub coupling_residual: f64,
    /// max scaled ODE residual sampled at 10 interior points per edge
    pub ode_residual: f64,
}

/// Grid resolution for eigenfunction sampling and quadrature: enough
/// points per oscillation of |u|^2 to keep Simpson error well under the
/// 1e-6 certification tolerances.
fn grid_points(lambda: C64, len: f64) -> usize {
    let n = (129.0 + 15.0 * lambda.norm() * len).min(20001.0) as usize;
    n | 1
}

/// Quadrature nodes, Simpson weights, and the damping value seen by each
/// node, split at damping / potential discontinuities so no panel
/// straddles a jump and breakpoint nodes take their own segment's value.
fn edge_quadrature(
    damping: &crate::profile::CoefficientProfile,
    potential: &crate::profile::CoefficientProfile,
    lambda: C64,
) -> Vec<(f64, f64, f64)> {
    let len = damping.length();
    let pieces: Vec<(f64, f64)> = match (damping.constant_segments(), potential.constant_segments())
    {
        (Some(sa), Some(sb)) => {
            let mut cuts: Vec<f64> = sa
                .iter()
                .chain(sb.iter())
                .flat_map(|(x0, x1, _)| [*x0, *x1])
                .collect();
            cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
            cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
            cuts.windows(2).map(|w| (w[0], w[1])).collect()
        }
        _ => vec![(0.0, len)],
    };
    let piecewise = damping.constant_segments().is_some();
    let mut out = Vec::new();
    for (x0, x1) in pieces {
        let n = grid_points(lambda, x1 - x0).max(65);
        let h = (x1 - x0) / (n - 1) as f64;
        let seg_a = damping.eval(0.5 * (x0 + x1));
        for i in 0..n {
            let w = if i == 0 || i == n - 1 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
            let x = x0 + i as f64 * h;
            let a = if piecewise { seg_a } else { damping.eval(x) };
            out.push((x, w, a));
        }
    }
    out
}

/// Reconstruct the eigenfunction at a certified root from the flower
/// nullspace (right singular vector of the smallest singular value).
pub fn eigenfunction_at(
    system: &SecularSystem,
    lambda: C64,
) -> Result<Eigenfunction, AnalysisError> {
    let mat = system.flower_matrix_plain(lambda)?;
    let (sigma_min_raw, beta) = null_vector(&mat);
    let sigma_min = sigma_min_raw / mat.max_abs().max(1e-300);
    let graph = &system.graph;
    let mut bases = Vec::with_capacity(graph.n_edges());
    for (j, e) in graph.edges().iter().enumerate() {
        let (b1, b2) = (beta[2 * j], beta[2 * j + 1]);
        if e.damping.is_constant() && e.potential.is_constant() {
            let lt = lambda_tilde(lambda, e.damping.average(), e.potential.average());
            bases.push(EdgeBasis::Constant { lt, b1, b2 });
        } else {
            // alpha_pm coefficients on u_pm; sample the combination exactly
            let grid = grid_points(lambda, e.length);
            let xs: Vec<f64> = (0..grid)
                .map(|i| e.length * i as f64 / (grid - 1) as f64)
                .collect();
            let pair =
                sample_fundamental_pair(&e.damping, &e.potential, lambda, system.wkb_order, &xs)?;
            let mut u = Vec::with_capacity(grid);
            let mut du = Vec::with_capacity(grid);
            for (p, m) in &pair {
                let fp = p.ln_scale.exp();
                let fm = m.ln_scale.exp();
                u.push(b1 * p.value * fp + b2 * m.value * fm);
                du.push(b1 * p.dvalue * fp + b2 * m.dvalue * fm);
            }
            bases.push(EdgeBasis::Sampled { xs, u, du });
        }
    }
    // normalize: sum of L2 norms = 1
    let mut norms_sq = Vec::with_capacity(graph.n_edges());
    let mut deriv_sq = 0.0;
    for (e, basis) in graph.edges().iter().zip(bases.iter()) {
        let quad = edge_quadrature(&e.damping, &e.potential, lambda);
        let mut nsq = 0.0;
        let mut dsq = 0.0;
        for &(x, w, _) in &quad {
            let (u, du) = basis.eval(x);
            nsq += w * u.norm_sqr();
            dsq += w * du.norm_sqr();
        }
        norms_sq.push(nsq);
        deriv_sq += dsq;
    }
    let total: f64 = norms_sq.iter().sum();
    let scale = 1.0 / total.sqrt();
    for basis in bases.iter_mut() {
        match basis {
            EdgeBasis::Constant { b1, b2, .. } => {
                *b1 *= scale;
                *b2 *= scale;
            }
            EdgeBasis::Sampled { u, du, .. } => {
                for v in u.iter_mut() {
                    *v *= scale;
                }
                for v in du.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
    let derivative_ratio = deriv_sq / total;
    for n in norms_sq.iter_mut() {
        *n /= total;
    }

    // coupling residual: (U - I) Psi + i (U + I) Psi' over all slots, scaled
    // by the largest slot value
    let n2 = 2 * graph.n_edges();
    let mut psi = vec![C64::new(0.0, 0.0); n2];
    let mut dpsi = vec![C64::new(0.0, 0.0); n2];
    for (j, e) in graph.edges().iter().enumerate() {
        let (u0, du0) = bases[j].eval(0.0);
        let (ul, dul) = bases[j].eval(e.length);
        psi[2 * j] = u0;
        dpsi[2 * j] = du0; // outgoing at tail
        psi[2 * j + 1] = ul;
        dpsi[2 * j + 1] = -dul; // outgoing at head
    }
    let mut coupling_residual = 0.0f64;
    let scale_ref = psi
        .iter()
        .map(|z| z.norm())
        .chain(dpsi.iter().map(|z| z.norm() / (1.0 + lambda.norm())))
        .fold(0.0, f64::max)
        .max(1e-300);
    let slots = graph.vertex_slots();
    for (v, sv) in slots.iter().enumerate() {
        let u = &system.couplings[v].matrix;
        for (i, _si) in sv.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &sk) in sv.iter().enumerate() {
                let idy = if i == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                acc += (u[(i, k)] - idy) * psi[sk] + C64::new(0.0, 1.0) * (u[(i, k)] + idy) * dpsi[sk];
            }
            coupling_residual = coupling_residual.max(acc.norm() / ((1.0 + lambda.norm()) * scale_ref));
        }
    }

    // ODE residual by local 5-point differences with lambda-scaled stencil
    let mut ode_residual = 0.0f64;
    for (j, e) in graph.edges().iter().enumerate() {
        let h = (0.02 / (1.0 + lambda.norm())).min(e.length / 8.0);
        for k in 1..=10 {
            let x = e.length * k as f64 / 11.0;
            let stencil: Vec<C64> = (-2..=2)
                .map(|s| bases[j].eval(x + s as f64 * h).0)
                .collect();
            let upp = (-stencil[0] + stencil[1] * 16.0 - stencil[2] * 30.0 + stencil[3] * 16.0
                - stencil[4])
                / (12.0 * h * h);
            let q = lambda * lambda + lambda * (2.0 * e.damping.eval(x)) - e.potential.eval(x);
            let u = stencil[2];
            let scale = (q * u).norm().max(upp.norm()).max(1e-300);
            ode_residual = ode_residual.max((upp - q * u).norm() / scale);
        }
    }

    Ok(Eigenfunction {
        lambda,
        bases,
        edge_norms_sq: norms_sq,
        derivative_ratio,
        sigma_min,
        coupling_residual,
        ode_residual,
    })
}

/// |Re lambda + (sum_j int a_j |u_j|^2) / (sum_j ||u_j||^2)| for an
/// eigenpair with nontrivial imaginary part.
pub fn rayleigh_identity_residual(
    system: &SecularSystem,
    ef: &Eigenfunction,
) -> Result<f64, AnalysisError> {
    if ef.lambda.im.abs() <= 1e-6 {
        return Err(AnalysisError::RealEigenvalue(ef.lambda));
    }
    let graph = &system.graph;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (e, basis) in graph.edges().iter().zip(ef.bases.iter()) {
        let quad = edge_quadrature(&e.damping, &e.potential, ef.lambda);
        for &(x, w, a) in &quad {
            let usq = basis.eval(x).0.norm_sqr();
            total += w * usq;
            weighted += w * a * usq;
        }
    }
    Ok((ef.lambda.re + weighted / total).abs())
}

/// The probability distribution mu_R(I) from an eigenvalue census.
#[derive(Debug, Clone)]
pub struct MuDistribution {
    pub interval: (f64, f64),
    pub r: f64,
    pub numerator: usize,
    pub denominator: usize,
}

impl MuDistribution {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Exact rational reduced by gcd.
    pub fn reduced(&self) -> (usize, usize) {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(self.numerator, self.denominator).max(1);
        (self.numerator / g, self.denominator / g)
    }
}

/// The band-restricted measure: eigenvalues with Re in I and
/// R1 < |Im| < R2 against all eigenvalues in the band. Past the
/// low-frequency region the band ratios quantize exactly to m_I / 2N,
/// while the cumulative mu_R only approaches that limit (real eigenvalues
/// and low-frequency outliers keep its denominator from ever splitting
/// evenly).
pub fn mu_band(
    eigenvalues: &[(C64, usize)],
    interval: (f64, f64),
    r1: f64,
    r2: f64,
) -> MuDistribution {
    let mut num = 0usize;
    let mut den = 0usize;
    for &(lam, mult) in eigenvalues {
        let im = lam.im.abs();
        if im > r1 && im < r2 {
            den += mult;
            if lam.re > interval.0 && lam.re < interval.1 {
                num += mult;
            }
        }
    }
    MuDistribution {
        interval,
        r: r2,
        numerator: num,
        denominator: den,
    }
}

/// Count eigenvalues with Re in I against all eigenvalues with |Im| < R.
/// `eigenvalues` must be the complete census for |Im| < R (multiplicity
/// included); `expected_total` cross-checks completeness when known.
pub fn mu_measure(
    eigenvalues: &[(C64, usize)],
    interval: (f64, f64),
    r: f64,
    expected_total: Option<usize>,
) -> Result<MuDistribution, AnalysisError> {
    let mut num = 0usize;
    let mut den = 0usize;
    for &(lam, mult) in eigenvalues {
        if lam.im.abs() < r {
            den += mult;
            if lam.re > interval.0 && lam.re < interval.1 {
                num += mult;
            }
        }
    }
    if let Some(want) = expected_total {
        if want != den {
            return Err(AnalysisError::IncompleteCoverage {
                count: want,
                supplied: den,
            });
        }
    }
    Ok(MuDistribution {
        interval,
        r,
        numerator: num,
        denominator: den,
    })
}

/// Fitted counting-function slope of a tracked sequence: least squares of
/// #{|Im lambda_n| < R} against R over a grid of R values; the asymptotic
/// slope is 1/(2 pi).
pub fn counting_slope(fit: &SequenceFit, r_values: &[f64]) -> f64 {
    let counts: Vec<f64> = r_values
        .iter()
        .map(|&r| fit.lambdas.iter().filter(|(_, l)| l.im.abs() < r).count() as f64)
        .collect();
    let m = r_values.len() as f64;
    let sx: f64 = r_values.iter().sum();
    let sxx: f64 = r_values.iter().map(|r| r * r).sum();
    let sy: f64 = counts.iter().sum();
    let sxy: f64 = r_values.iter().zip(counts.iter()).map(|(r, c)| r * c).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Executable content of the averaging theorem: fitted c0 of the true
/// system vs the system with profiles replaced by their averages.
#[derive(Debug, Clone)]
pub struct CrosscheckRow {
    pub c0_seed: C64,
    pub fitted_true: C64,
    pub fitted_averaged: C64,
}

pub fn abscissa_crosscheck(
    true_system: &SecularSystem,
    averaged_system: &SecularSystem,
    c0_seeds: &[C64],
    n_center: u32,
    tol: f64,
) -> Result<Vec<CrosscheckRow>, AnalysisError> {
    let lo = n_center.saturating_sub(4);
    let hi = n_center + 4;
    let mut rows = Vec::new();
    for &seed in c0_seeds {
        let fit_true = track_sequence(true_system, seed, lo..=hi, tol)?;
        let fit_avg = track_sequence(averaged_system, seed, lo..=hi, tol)?;
        rows.push(CrosscheckRow {
            c0_seed: seed,
            fitted_true: fit_true.c0,
            fitted_averaged: fit_avg.c0,
        });
    }
    Ok(rows)
}

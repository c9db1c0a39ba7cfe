//! Secular determinants: the zeros in lambda are the eigenvalues of the
//! damped wave pencil u'' = (lambda^2 + 2 lambda a(x) - b(x)) u with the
//! vertex couplings.
//!
//! Two independent backends share the zero set and certify each other:
//! the flower-model block determinant and the bond-scattering determinant
//! det(L J Sigma - I).

use crate::coupling::{assemble_flower, CouplingError, UnitaryCoupling};
use crate::graph::{End, MetricGraph};
use crate::linalg::{det_scaled, CMat, C64};
use crate::ode::{integrate_scaled, integrate_through, OdeError, ScaledState};
use crate::profile::CoefficientProfile;
use crate::quad::derivative4;
use crate::scaled::Scaled;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SecularError {
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("insufficient grid resolution for WKB order {order}: {points} points")]
    WkbResolution { order: usize, points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Flower,
    Scattering,
}

/// Branch convention: principal square root, so Re >= 0 with ties broken
/// toward Im >= 0.
pub fn lambda_tilde(lambda: C64, a_avg: f64, b_avg: f64) -> C64 {
    (lambda * lambda + lambda * (2.0 * a_avg) - b_avg).sqrt()
}

/// The lambda-following branch lt = lambda sqrt(1 + (2a lambda - b)/lambda^2).
///
/// Equal to the principal branch up to sign, but analytic off the real
/// segment between the two real branch points of lambda^2 + 2a lambda - b.
/// The principal (Re >= 0) branch instead has a cut along the whole line
/// Re lambda = -a, which would break winding numbers and finite differences
/// right where eigenvalues live; backends that plug lt into non-even
/// expressions use this branch.
pub fn lambda_tilde_analytic(lambda: C64, a_avg: f64, b_avg: f64) -> C64 {
    let q = lambda * lambda + lambda * (2.0 * a_avg) - b_avg;
    if lambda.norm() < 1e-9 * (1.0 + 2.0 * a_avg.abs() + b_avg.abs()) {
        return q.sqrt();
    }
    lambda * (q / (lambda * lambda)).sqrt()
}

/// WKB phase coefficients phi_0..phi_m on a uniform grid over the edge.
/// phi_0 = a, phi_1 = -(pm a' + a^2 + b)/2, then the convolution recursion.
pub fn wkb_phase_coefficients(
    damping: &CoefficientProfile,
    potential: &CoefficientProfile,
    order: usize,
    plus_branch: bool,
    points: usize,
) -> Result<Vec<Vec<f64>>, SecularError> {
    if points < 4 * (order + 1) || points < 5 {
        return Err(SecularError::WkbResolution {
            order,
            points,
        });
    }
    let h = damping.length() / (points - 1) as f64;
    let sgn = if plus_branch { 1.0 } else { -1.0 };
    let a = damping.sample_grid(points);
    let b = potential.sample_grid(points);
    let da = damping.derivative_grid(points);
    let mut phis: Vec<Vec<f64>> = vec![a.clone()];
    if order >= 1 {
        let phi1: Vec<f64> = (0..points)
            .map(|i| -0.5 * (sgn * da[i] + a[i] * a[i] + b[i]))
            .collect();
        phis.push(phi1);
    }
    for i in 2..=order {
        let dprev = derivative4(&phis[i - 1], h);
        let mut phi = vec![0.0; points];
        for (g, p) in phi.iter_mut().enumerate() {
            let mut conv = 0.0;
            for s in 0..i {
                conv += phis[s][g] * phis[i - 1 - s][g];
            }
            *p = -0.5 * (sgn * dprev[g] + conv);
        }
        phis.push(phi);
    }
    Ok(phis)
}

/// Truncated WKB phase at one grid point: sum phi_i(x) / lambda^i.
fn wkb_phase_at(phis: &[Vec<f64>], index: usize, lambda: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut pw = C64::new(1.0, 0.0);
    for phi in phis {
        acc += phi[index] / pw;
        pw *= lambda;
    }
    acc
}

/// Fundamental solution data for one edge at one lambda.
///
/// Values and derivatives are stored in scaled (log-magnitude, phase) form.
/// For constant profiles the basis is {e^{+lt x}, e^{-lt x}} in closed form;
/// for variable profiles the u_pm pair is integrated from WKB-matched
/// initial data u_pm(0) = 1, u_pm'(0) = pm(lambda + phi_pm(0)).
#[derive(Debug, Clone)]
pub struct EdgeWave {
    pub u_plus_l: Scaled,
    pub u_minus_l: Scaled,
    pub du_plus_0: C64,
    pub du_minus_0: C64,
    pub du_plus_l: Scaled,
    pub du_minus_l: Scaled,
    /// Set iff the edge has constant coefficients.
    pub lambda_tilde: Option<C64>,
}

impl EdgeWave {
    /// Wronskian drift |W(l) - W(0)| / |W(0)|; the ODE has no first-order
    /// term so the Wronskian is constant (Abel).
    pub fn wronskian_drift(&self) -> f64 {
        let w0 = self.du_minus_0 - self.du_plus_0;
        let wl = self
            .u_plus_l
            .mul(&self.du_minus_l)
            .add(&self.u_minus_l.mul(&self.du_plus_l).neg());
        (wl.add(&Scaled::from_c64(-w0)).to_c64()).norm() / w0.norm()
    }
}

const WKB_GRID: usize = 65;

/// Transfer entries over a constant-coefficient step of length h, entire
/// in q = lt^2: (C, S, s) with cosh(lt h) = C e^s, sinh(lt h)/lt = S e^s.
fn transfer_cs(q: C64, h: f64) -> (C64, C64, f64) {
    let z = q.sqrt() * h;
    if z.norm() < 1e-4 {
        let w = q * (h * h);
        let c = C64::new(1.0, 0.0) + w * 0.5 + w * w / 24.0;
        let s = (C64::new(1.0, 0.0) + w / 6.0 + w * w / 120.0) * h;
        (c, s, 0.0)
    } else {
        let (ch, sh, s) = cosh_sinh_scaled(z);
        let lt = z / h;
        (ch, sh / lt, s)
    }
}

/// Merged constant segments (x0, x1, a, b) when both profiles are
/// piecewise constant.
fn merged_segments(
    damping: &CoefficientProfile,
    potential: &CoefficientProfile,
) -> Option<Vec<(f64, f64, f64, f64)>> {
    let sa = damping.constant_segments()?;
    let sb = potential.constant_segments()?;
    let mut cuts: Vec<f64> = sa
        .iter()
        .chain(sb.iter())
        .flat_map(|(x0, x1, _)| [*x0, *x1])
        .collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        out.push((w[0], w[1], damping.eval(mid), potential.eval(mid)));
    }
    Some(out)
}

/// Exact propagation of (u, u') across piecewise-constant segments,
/// emitted at the sorted sample points `xs`.
fn propagate_segments(
    segments: &[(f64, f64, f64, f64)],
    lambda: C64,
    u0: C64,
    du0: C64,
    xs: &[f64],
) -> Vec<ScaledState> {
    let dscale = 1.0 + lambda.norm();
    let mut state = ScaledState {
        value: u0,
        dvalue: du0,
        ln_scale: 0.0,
    };
    let mut x = 0.0f64;
    let mut out = Vec::with_capacity(xs.len());
    let mut seg = 0usize;
    let step_to = |target: f64, state: &mut ScaledState, seg: &mut usize, x: &mut f64| {
        while *x < target - 1e-15 {
            while *seg + 1 < segments.len() && segments[*seg].1 <= *x + 1e-15 {
                *seg += 1;
            }
            let stop = segments[*seg].1.min(target);
            let h = stop - *x;
            if h <= 0.0 {
                break;
            }
            let (_, _, a, b) = segments[*seg];
            let q = lambda * lambda + lambda * (2.0 * a) - b;
            let (c, s, ln) = transfer_cs(q, h);
            let u = state.value * c + state.dvalue * s;
            let du = state.value * q * s + state.dvalue * c;
            state.value = u;
            state.dvalue = du;
            state.ln_scale += ln;
            let mag = state.value.norm().max(state.dvalue.norm() / dscale);
            if mag > 0.0 && (mag > 1e3 || mag < 1e-3) {
                state.value /= mag;
                state.dvalue /= mag;
                state.ln_scale += mag.ln();
            }
            *x = stop;
        }
    };
    for &target in xs {
        step_to(target, &mut state, &mut seg, &mut x);
        out.push(state);
    }
    out
}

/// Initial derivatives (u_+'(0), u_-'(0)) for the fundamental pair of a
/// non-constant edge: the analytic lambda-following branch for piecewise
/// profiles (pure exponentials on the first segment), WKB-matched data for
/// smooth sampled profiles.
fn fundamental_ic(
    damping: &CoefficientProfile,
    potential: &CoefficientProfile,
    lambda: C64,
    wkb_order: usize,
) -> Result<(C64, C64), SecularError> {
    if let Some(segs) = merged_segments(damping, potential) {
        let (_, _, a0, b0) = segs[0];
        let lt0 = lambda_tilde_analytic(lambda, a0, b0);
        return Ok((lt0, -lt0));
    }
    let points = WKB_GRID.max(4 * (wkb_order + 1));
    let phis_p = wkb_phase_coefficients(damping, potential, wkb_order, true, points)?;
    let phis_m = wkb_phase_coefficients(damping, potential, wkb_order, false, points)?;
    Ok((
        lambda + wkb_phase_at(&phis_p, 0, lambda),
        -(lambda + wkb_phase_at(&phis_m, 0, lambda)),
    ))
}

/// The fundamental pair (u_+, u_-) of one edge sampled at sorted `xs`,
/// with consistent initial data: closed form for constant coefficients,
/// exact transfer matrices for piecewise-constant ones, renormalized
/// adaptive integration otherwise.
pub fn sample_fundamental_pair(
    damping: &CoefficientProfile,
    potential: &CoefficientProfile,
    lambda: C64,
    wkb_order: usize,
    xs: &[f64],
) -> Result<Vec<(ScaledState, ScaledState)>, SecularError> {
    if damping.is_constant() && potential.is_constant() {
        let lt = lambda_tilde(lambda, damping.average(), potential.average());
        return Ok(xs
            .iter()
            .map(|&x| {
                let ep = Scaled::cexp(lt * x);
                let em = Scaled::cexp(-lt * x);
                (
                    ScaledState {
                        value: ep.phase,
                        dvalue: ep.phase * lt,
                        ln_scale: ep.ln_mag,
                    },
                    ScaledState {
                        value: em.phase,
                        dvalue: em.phase * (-lt),
                        ln_scale: em.ln_mag,
                    },
                )
            })
            .collect());
    }
    let one = C64::new(1.0, 0.0);
    let (du0_p, du0_m) = fundamental_ic(damping, potential, lambda, wkb_order)?;
    if let Some(segs) = merged_segments(damping, potential) {
        let plus = propagate_segments(&segs, lambda, one, du0_p, xs);
        let minus = propagate_segments(&segs, lambda, one, du0_m, xs);
        return Ok(plus.into_iter().zip(minus).collect());
    }
    let a = damping.clone();
    let b = potential.clone();
    let q = move |x: f64| lambda * lambda + lambda * (2.0 * a.eval(x)) - b.eval(x);
    let l = damping.length();
    let plus = integrate_through(&q, l, one, du0_p, lambda, xs)?;
    let minus = integrate_through(&q, l, one, du0_m, lambda, xs)?;
    Ok(plus.into_iter().zip(minus).collect())
}

pub fn fundamental_solution_data(
    damping: &CoefficientProfile,
    potential: &CoefficientProfile,
    lambda: C64,
    wkb_order: usize,
) -> Result<EdgeWave, SecularError> {
    let l = damping.length();
    if damping.is_constant() && potential.is_constant() {
        let lt = lambda_tilde(lambda, damping.average(), potential.average());
        let u_plus_l = Scaled::cexp(lt * l);
        let u_minus_l = Scaled::cexp(-lt * l);
        return Ok(EdgeWave {
            u_plus_l,
            u_minus_l,
            du_plus_0: lt,
            du_minus_0: -lt,
            du_plus_l: u_plus_l.mul_c64(lt),
            du_minus_l: u_minus_l.mul_c64(-lt),
            lambda_tilde: Some(lt),
        });
    }
    let (du0_p, du0_m) = fundamental_ic(damping, potential, lambda, wkb_order)?;
    let one = C64::new(1.0, 0.0);
    let (plus, minus) = if let Some(segs) = merged_segments(damping, potential) {
        let p = propagate_segments(&segs, lambda, one, du0_p, &[l]);
        let m = propagate_segments(&segs, lambda, one, du0_m, &[l]);
        (p[0], m[0])
    } else {
        let a = damping.clone();
        let b = potential.clone();
        let q = move |x: f64| lambda * lambda + lambda * (2.0 * a.eval(x)) - b.eval(x);
        (
            integrate_scaled(&q, l, one, du0_p, lambda, None)?,
            integrate_scaled(&q, l, one, du0_m, lambda, None)?,
        )
    };
    Ok(EdgeWave {
        u_plus_l: Scaled::from_c64(plus.value).shift(plus.ln_scale),
        u_minus_l: Scaled::from_c64(minus.value).shift(minus.ln_scale),
        du_plus_0: du0_p,
        du_minus_0: du0_m,
        du_plus_l: Scaled::from_c64(plus.dvalue).shift(plus.ln_scale),
        du_minus_l: Scaled::from_c64(minus.dvalue).shift(minus.ln_scale),
        lambda_tilde: None,
    })
}

/// cosh(z) and sinh(z) scaled by e^{-s} with s chosen to keep them finite;
/// returns (cosh * e^{-s}, sinh * e^{-s}, s).
fn cosh_sinh_scaled(z: C64) -> (C64, C64, f64) {
    let r = z.re.abs();
    let s = if r > 300.0 { r - 300.0 } else { 0.0 };
    // work with w = z or -z so that Re w >= 0, then use parity
    let w = if z.re >= 0.0 { z } else { -z };
    let ep = C64::new(w.re - s, w.im).exp();
    let em = C64::new(-w.re - s, -w.im).exp();
    let ch = (ep + em) * 0.5;
    let sh = (ep - em) * 0.5;
    if z.re >= 0.0 {
        (ch, sh, s)
    } else {
        (ch, -sh, s)
    }
}

/// Evaluator mapping complex lambda to a scaled secular determinant value.
#[derive(Debug, Clone)]
pub struct SecularSystem {
    pub graph: MetricGraph,
    pub couplings: Vec<UnitaryCoupling>,
    pub backend: Backend,
    pub wkb_order: usize,
    u_minus_i: CMat,
    u_plus_i: CMat,
    all_constant: bool,
}

impl SecularSystem {
    pub fn new(
        graph: MetricGraph,
        couplings: Vec<UnitaryCoupling>,
        backend: Backend,
    ) -> Result<SecularSystem, SecularError> {
        let flower = assemble_flower(&graph, &couplings)?;
        let n2 = 2 * graph.n_edges();
        let mut u_minus_i = flower.matrix.clone();
        let mut u_plus_i = flower.matrix;
        for i in 0..n2 {
            u_minus_i[(i, i)] -= C64::new(1.0, 0.0);
            u_plus_i[(i, i)] += C64::new(1.0, 0.0);
        }
        let all_constant = graph
            .edges()
            .iter()
            .all(|e| e.damping.is_constant() && e.potential.is_constant());
        Ok(SecularSystem {
            graph,
            couplings,
            backend,
            wkb_order: 2,
            u_minus_i,
            u_plus_i,
            all_constant,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    pub fn with_backend(&self, backend: Backend) -> SecularSystem {
        let mut s = self.clone();
        s.backend = backend;
        s
    }

    /// The scaled secular determinant of the selected backend.
    pub fn determinant(&self, lambda: C64) -> Result<Scaled, SecularError> {
        match self.backend {
            Backend::Flower => self.flower_determinant(lambda),
            Backend::Scattering => self.scattering_determinant(lambda),
        }
    }

    /// Flower matrix (U-I) M1 + i (U+I) M2 with per-column equilibration.
    /// Returns (matrix, per-column ln scales). The determinant of the raw
    /// matrix is det(returned) * exp(sum of scales).
    pub fn flower_matrix(&self, lambda: C64) -> Result<(CMat, Vec<f64>), SecularError> {
        let n = self.graph.n_edges();
        let n2 = 2 * n;
        // per-edge 2x2 blocks of M1 (values) and M2 (outgoing derivatives),
        // rows (tail slot, head slot), columns the two basis coefficients
        let mut m1 = vec![[Scaled::ZERO; 4]; n];
        let mut m2 = vec![[Scaled::ZERO; 4]; n];
        for (j, e) in self.graph.edges().iter().enumerate() {
            if e.damping.is_constant() && e.potential.is_constant() {
                // even basis {cosh(lt x), sinh(lt x)/lt}: entire in lambda
                let lt = lambda_tilde(lambda, e.damping.average(), e.potential.average());
                let (ch, sh, s) = cosh_sinh_scaled(lt * e.length);
                let ch = Scaled::from_c64(ch).shift(s);
                let sh = Scaled::from_c64(sh).shift(s);
                m1[j] = [
                    Scaled::ONE,
                    Scaled::ZERO,
                    ch,
                    if lt.norm() == 0.0 {
                        Scaled::from_c64(C64::new(e.length, 0.0))
                    } else {
                        sh.div(&Scaled::from_c64(lt))
                    },
                ];
                // v1' = lt sinh(lt x), v2' = cosh(lt x)
                m2[j] = [
                    Scaled::ZERO,
                    Scaled::ONE,
                    sh.mul_c64(lt).neg(),
                    ch.neg(),
                ];
            } else {
                let wave =
                    fundamental_solution_data(&e.damping, &e.potential, lambda, self.wkb_order)?;
                m1[j] = [Scaled::ONE, Scaled::ONE, wave.u_plus_l, wave.u_minus_l];
                m2[j] = [
                    Scaled::from_c64(wave.du_plus_0),
                    Scaled::from_c64(wave.du_minus_0),
                    wave.du_plus_l.neg(),
                    wave.du_minus_l.neg(),
                ];
            }
        }
        // assemble columns: A[:, col] = sum over the edge's two slots of
        // (U-I)[:, slot] m1[slot, col] + i (U+I)[:, slot] m2[slot, col];
        // (U +- I)[:, slot] is nonzero only inside the slot's vertex block
        let vertex_slots = self.graph.vertex_slots();
        let mut scaled_cols: Vec<Vec<Scaled>> = vec![vec![Scaled::ZERO; n2]; n2];
        let i_unit = C64::new(0.0, 1.0);
        for j in 0..n {
            let slot_t = self.graph.slot(j, End::Tail);
            let slot_h = self.graph.slot(j, End::Head);
            for (colk, col) in [2 * j, 2 * j + 1].iter().enumerate() {
                let entries = [
                    (slot_t, m1[j][colk], m2[j][colk]),
                    (slot_h, m1[j][2 + colk], m2[j][2 + colk]),
                ];
                for &(slot, v1, v2) in &entries {
                    for &row in &vertex_slots[self.graph.slot_vertex(slot)] {
                        let c1 = self.u_minus_i[(row, slot)];
                        let c2 = self.u_plus_i[(row, slot)] * i_unit;
                        let mut acc = scaled_cols[*col][row];
                        if c1 != C64::new(0.0, 0.0) && !v1.is_zero() {
                            acc = acc.add(&v1.mul_c64(c1));
                        }
                        if c2 != C64::new(0.0, 0.0) && !v2.is_zero() {
                            acc = acc.add(&v2.mul_c64(c2));
                        }
                        scaled_cols[*col][row] = acc;
                    }
                }
            }
        }
        Ok(equilibrate(scaled_cols, n2))
    }

    pub fn flower_determinant(&self, lambda: C64) -> Result<Scaled, SecularError> {
        let (mat, col_ln) = self.flower_matrix(lambda)?;
        let shift: f64 = col_ln.iter().sum();
        Ok(det_scaled(mat).shift(shift))
    }

    /// The flower matrix with plain complex entries (no equilibration).
    /// Column scaling would regularize exactly the near-null direction the
    /// eigenfunction lives in, so nullspace extraction must use this form.
    pub fn flower_matrix_plain(&self, lambda: C64) -> Result<CMat, SecularError> {
        let (mat, col_ln) = self.flower_matrix(lambda)?;
        let mut out = mat;
        for c in 0..out.m {
            let f = col_ln[c].exp();
            for r in 0..out.n {
                out[(r, c)] *= f;
            }
        }
        Ok(out)
    }

    /// Ordered channel list at each vertex: the directed edge starting at the
    /// vertex for each slot, in slot order (matches the coupling matrix).
    fn vertex_channels(&self) -> Vec<Vec<usize>> {
        let n = self.graph.n_edges();
        let slots = self.graph.vertex_slots();
        slots
            .iter()
            .map(|sv| {
                sv.iter()
                    .map(|&s| {
                        let e = s / 2;
                        if s % 2 == 0 {
                            e // tail slot: directed edge e starts here
                        } else {
                            e + n // head slot: reversed edge starts here
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn scattering_determinant(&self, lambda: C64) -> Result<Scaled, SecularError> {
        if self.all_constant {
            self.scattering_determinant_constant(lambda)
        } else {
            self.scattering_determinant_general(lambda)
        }
    }

    /// det(L J Sigma - I) with L = exp(diag(-lt_e l_e)); constant profiles.
    fn scattering_determinant_constant(&self, lambda: C64) -> Result<Scaled, SecularError> {
        let n = self.graph.n_edges();
        let n2 = 2 * n;
        let lt: Vec<C64> = self
            .graph
            .edges()
            .iter()
            .map(|e| lambda_tilde_analytic(lambda, e.damping.average(), e.potential.average()))
            .collect();
        let channels = self.vertex_channels();
        // Sigma, block by start vertex
        let mut sigma = CMat::zeros(n2, n2);
        for (v, ch) in channels.iter().enumerate() {
            if ch.is_empty() {
                continue;
            }
            let lams: Vec<C64> = ch.iter().map(|&d| lt[d % n]).collect();
            let sv = self.couplings[v].scattering_exact(&lams)?;
            for (i, &di) in ch.iter().enumerate() {
                for (j, &dj) in ch.iter().enumerate() {
                    sigma[(di, dj)] = sv[(i, j)];
                }
            }
        }
        // A = L J Sigma - I; row d of J Sigma is row rev(d) of Sigma
        let mut a = CMat::zeros(n2, n2);
        for d in 0..n2 {
            let rev = (d + n) % n2;
            let damp = (-lt[d % n] * self.graph.edges()[d % n].length).exp();
            for c in 0..n2 {
                a[(d, c)] = damp * sigma[(rev, c)];
            }
            a[(d, d)] -= C64::new(1.0, 0.0);
        }
        Ok(det_scaled(a))
    }

    /// General profiles: 4N x 4N system in (alpha_in, alpha_out) with vertex
    /// scattering rows and per-edge fundamental-system matching rows.
    fn scattering_determinant_general(&self, lambda: C64) -> Result<Scaled, SecularError> {
        let n = self.graph.n_edges();
        let n2 = 2 * n;
        // per-directed-edge fundamental data, profile oriented along the edge
        let mut waves: Vec<EdgeWave> = Vec::with_capacity(n2);
        for e in self.graph.edges() {
            waves.push(fundamental_solution_data(
                &e.damping,
                &e.potential,
                lambda,
                self.wkb_order,
            )?);
        }
        for e in self.graph.edges() {
            waves.push(fundamental_solution_data(
                &e.damping.reversed(),
                &e.potential.reversed(),
                lambda,
                self.wkb_order,
            )?);
        }
        let channels = self.vertex_channels();
        let mut rows: Vec<Vec<Scaled>> = vec![vec![Scaled::ZERO; 2 * n2]; 2 * n2];
        // rows 0..n2: per vertex, [(U-I) + i(U+I) Min] alpha_in + [(U-I) + i(U+I) Mout] alpha_out = 0
        let i_unit = C64::new(0.0, 1.0);
        for ch in channels.iter() {
            for &dr in ch {
                for &dc in ch {
                    let (umi, upi) = self.flower_coupling_entry(dr, dc, n);
                    let min = waves[dc].du_plus_0;
                    let mout = waves[dc].du_minus_0;
                    rows[dr][dc] = Scaled::from_c64(umi + i_unit * upi * min);
                    rows[dr][n2 + dc] = Scaled::from_c64(umi + i_unit * upi * mout);
                }
            }
        }
        // rows n2..2n2: matching of the directed pair (e, e+n) per undirected edge
        for j in 0..n {
            let e = j;
            let erev = j + n;
            // value row: alpha_rev_in + alpha_rev_out - alpha_e_in u_{e+}(l) - alpha_e_out u_{e-}(l) = 0
            let r1 = n2 + 2 * j;
            rows[r1][erev] = Scaled::ONE;
            rows[r1][n2 + erev] = Scaled::ONE;
            rows[r1][e] = waves[e].u_plus_l.neg();
            rows[r1][n2 + e] = waves[e].u_minus_l.neg();
            // derivative row: alpha_rev_in du_{rev+}(0) + alpha_rev_out du_{rev-}(0)
            //                + alpha_e_in du_{e+}(l) + alpha_e_out du_{e-}(l) = 0
            let r2 = n2 + 2 * j + 1;
            rows[r2][erev] = Scaled::from_c64(waves[erev].du_plus_0);
            rows[r2][n2 + erev] = Scaled::from_c64(waves[erev].du_minus_0);
            rows[r2][e] = waves[e].du_plus_l;
            rows[r2][n2 + e] = waves[e].du_minus_l;
        }
        // transpose into columns for equilibration
        let dim = 2 * n2;
        let mut cols: Vec<Vec<Scaled>> = vec![vec![Scaled::ZERO; dim]; dim];
        for (r, row) in rows.iter().enumerate() {
            for (c, val) in row.iter().enumerate() {
                cols[c][r] = *val;
            }
        }
        let (mat, col_ln) = equilibrate(cols, dim);
        let shift: f64 = col_ln.iter().sum();
        Ok(det_scaled(mat).shift(shift))
    }

    /// (U-I, U+I) entry pair connecting two directed-edge channels that
    /// start at the same vertex, read from the flower (slot) matrices.
    fn flower_coupling_entry(&self, dr: usize, dc: usize, n: usize) -> (C64, C64) {
        let slot_of = |d: usize| {
            if d < n {
                2 * d
            } else {
                2 * (d - n) + 1
            }
        };
        let (sr, sc) = (slot_of(dr), slot_of(dc));
        (self.u_minus_i[(sr, sc)], self.u_plus_i[(sr, sc)])
    }

    /// Scaled residual used for root certification: the Newton step length
    /// |f / f'| with a central-difference derivative, which estimates the
    /// distance to the nearest zero.
    pub fn newton_residual(&self, lambda: C64) -> Result<f64, SecularError> {
        let h = 1e-7 * (1.0 + lambda.norm());
        let f0 = self.determinant(lambda)?;
        let fp = self.determinant(lambda + h)?;
        let fm = self.determinant(lambda - h)?;
        // f' = (fp - fm) / 2h at common exponent
        let base = fp.ln_mag.max(fm.ln_mag);
        let deriv = (fp.value_rel(base) - fm.value_rel(base)) / (2.0 * h);
        if deriv.norm() == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(f0.value_rel(base).norm() / deriv.norm())
    }
}

/// Factor the max magnitude out of each column, returning plain complex
/// entries plus per-column ln scales. Columns of exact zeros keep scale 0.
fn equilibrate(cols: Vec<Vec<Scaled>>, dim: usize) -> (CMat, Vec<f64>) {
    let mut mat = CMat::zeros(dim, dim);
    let mut col_ln = vec![0.0; dim];
    for (c, col) in cols.iter().enumerate() {
        let mx = col
            .iter()
            .map(|s| s.ln_mag)
            .fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            continue;
        }
        col_ln[c] = mx;
        for (r, s) in col.iter().enumerate() {
            mat[(r, c)] = s.value_rel(mx);
        }
    }
    (mat, col_ln)
}

/// Closed-form secular function for a star graph with Dirichlet leaves and
/// a standard center: sum_j lt_j cosh(lt_j l_j) prod_{i != j} sinh(lt_i l_i).
pub fn star_secular_closed_form(
    lengths: &[f64],
    dampings: &[f64],
    potentials: &[f64],
    lambda: C64,
) -> Scaled {
    let n = lengths.len();
    assert!(n >= 1 && dampings.len() == n && potentials.len() == n);
    let mut chs = Vec::with_capacity(n);
    let mut shs = Vec::with_capacity(n);
    for j in 0..n {
        let lt = lambda_tilde_analytic(lambda, dampings[j], potentials[j]);
        let z = lt * lengths[j];
        let em = (-z * 2.0).exp();
        chs.push((lt, Scaled::cexp(z).mul_c64((C64::new(1.0, 0.0) + em) * 0.5)));
        shs.push(Scaled::cexp(z).mul_c64((C64::new(1.0, 0.0) - em) * 0.5));
    }
    let mut total = Scaled::ZERO;
    for j in 0..n {
        let mut term = chs[j].1.mul_c64(chs[j].0);
        for (i, sh) in shs.iter().enumerate() {
            if i != j {
                term = term.mul(sh);
            }
        }
        total = total.add(&term);
    }
    total
}

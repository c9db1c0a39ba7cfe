//! High-frequency abscissa polynomials in y = e^{c0}, built two independent
//! ways: explicit irreducible-pseudo-orbit expansion and a leading-order
//! characteristic polynomial. Their agreement is the module's correctness
//! argument; the roots give the abscissas c0 with weights.

use crate::coupling::UnitaryCoupling;
use crate::graph::{DirectedDouble, MetricGraph};
use crate::linalg::{det_scaled, lu_factor, CMat, C64};
use crate::poly::{cluster_reals, CPoly};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("graph is not equilateral with unit edges")]
    NotUnitEquilateral,
    #[error("2N = {0} exceeds the combinatorial guard (24); use the characteristic method")]
    TooLarge(usize),
    #[error("tree damping assignment needs a tree, got a graph with a cycle")]
    NotATree,
    #[error("tree damping assignment requires odd vertex degrees, vertex {0} has degree {1}")]
    EvenDegree(String, usize),
    #[error("zero polynomial")]
    ZeroPolynomial,
}

/// An irreducible pseudo orbit: edge-disjoint union of periodic orbits on
/// the directed double.
#[derive(Debug, Clone)]
pub struct PseudoOrbit {
    /// Constituent periodic orbits as cyclic directed-edge sequences.
    pub orbits: Vec<Vec<usize>>,
    /// Number of periodic orbits (the sign is (-1)^m).
    pub m: usize,
    /// Total number of directed edges used (reduced length in units of l0).
    pub length: usize,
    /// Product of leading-order scattering entries along all transitions.
    pub amplitude: C64,
}

/// Polynomial in y = e^{c0}, stored in the scaled variable t = y / radius
/// with radius the geometric mean of the root moduli: `poly.coeffs[k]`
/// multiplies t^k. Raw-y coefficients span e^{+-2 sum abar} (astronomical
/// for strongly damped graphs); in the scaled variable they stay within a
/// few orders of magnitude of each other, which is what makes per-
/// coefficient comparisons meaningful in double precision.
#[derive(Debug, Clone)]
pub struct AbscissaPolynomial {
    pub poly: CPoly,
    pub radius: f64,
    pub ln_scale: f64,
    pub provenance: Provenance,
    pub n_directed: usize,
}

impl AbscissaPolynomial {
    /// Roots in the original variable y.
    pub fn roots_y(&self) -> Vec<C64> {
        self.poly.roots().into_iter().map(|t| t * self.radius).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    OrbitExpansion,
    Characteristic,
}

#[derive(Debug, Clone)]
pub struct AbscissaCluster {
    /// Re c0 of the cluster.
    pub c: f64,
    /// Polynomial-root multiplicity m_c.
    pub multiplicity: usize,
    /// mu weight m_c / 2N as an exact rational (numerator, denominator).
    pub mu: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct AbscissaReport {
    pub polynomial: AbscissaPolynomial,
    pub roots_y: Vec<C64>,
    /// c0 = log y with principal branch, Im in (-pi, pi].
    pub c0_values: Vec<C64>,
    pub clusters: Vec<AbscissaCluster>,
    pub cluster_tol: f64,
}

fn require_unit_equilateral(graph: &MetricGraph) -> Result<(), OrbitError> {
    match graph.is_equilateral(1e-9) {
        Some(l) if (l - 1.0).abs() < 1e-9 => Ok(()),
        _ => Err(OrbitError::NotUnitEquilateral),
    }
}

/// All irreducible pseudo orbits of the directed double, including the
/// empty one. `sigma0` maps each vertex to its leading-order scattering
/// matrix in the channel order of `channels` (directed edges starting
/// there).
pub fn enumerate_pseudo_orbits(
    double: &DirectedDouble,
    sigma0: &[CMat],
    channels: &[Vec<usize>],
) -> Result<Vec<PseudoOrbit>, OrbitError> {
    let n2 = double.n_directed();
    if n2 > 24 {
        return Err(OrbitError::TooLarge(n2));
    }
    // channel index of directed edge d at its start vertex
    let mut chan_index = vec![0usize; n2];
    for ch in channels {
        for (i, &d) in ch.iter().enumerate() {
            chan_index[d] = i;
        }
    }
    // scattering entry for the transition d -> d' (start(d') = end(d)):
    // sigma_v[rev(d), d'] in channel coordinates
    let amp = |d: usize, dnext: usize| -> C64 {
        let v = double.end[d];
        debug_assert_eq!(double.start[dnext], v);
        let rev = double.reversal(d);
        sigma0[v][(chan_index[rev], chan_index[dnext])]
    };

    let mut out = vec![PseudoOrbit {
        orbits: Vec::new(),
        m: 0,
        length: 0,
        amplitude: C64::new(1.0, 0.0),
    }];

    // depth-first construction of edge-disjoint cycle collections; each
    // cycle is canonicalized by starting at its minimal directed edge, and
    // cycles are emitted with strictly increasing minimal edges
    struct Ctx<'a> {
        double: &'a DirectedDouble,
        amp: &'a dyn Fn(usize, usize) -> C64,
        used: Vec<bool>,
        cycles: Vec<Vec<usize>>,
        out: Vec<PseudoOrbit>,
        total_len: usize,
        total_amp: C64,
    }

    fn walk(ctx: &mut Ctx, anchor: usize, current: usize, path: &mut Vec<usize>, path_amp: C64) {
        let v = ctx.double.end[current];
        let nexts: Vec<usize> = ctx.double.out_edges[v]
            .iter()
            .cloned()
            .filter(|&d| d >= anchor)
            .collect();
        for d in nexts {
            if d == anchor {
                // close the cycle
                let cyc_amp = path_amp * (ctx.amp)(current, anchor);
                ctx.cycles.push(path.clone());
                let m = ctx.cycles.len();
                let length = ctx.total_len + path.len();
                let amplitude = ctx.total_amp * cyc_amp;
                ctx.out.push(PseudoOrbit {
                    orbits: ctx.cycles.clone(),
                    m,
                    length,
                    amplitude,
                });
                // continue with further cycles anchored strictly above
                let saved_len = ctx.total_len;
                let saved_amp = ctx.total_amp;
                ctx.total_len = length;
                ctx.total_amp = amplitude;
                start_cycles(ctx, anchor + 1);
                ctx.total_len = saved_len;
                ctx.total_amp = saved_amp;
                ctx.cycles.pop();
            } else if !ctx.used[d] {
                ctx.used[d] = true;
                path.push(d);
                walk(ctx, anchor, d, path, path_amp * (ctx.amp)(current, d));
                path.pop();
                ctx.used[d] = false;
            }
        }
    }

    fn start_cycles(ctx: &mut Ctx, from: usize) {
        let n2 = ctx.double.n_directed();
        for anchor in from..n2 {
            if ctx.used[anchor] {
                continue;
            }
            ctx.used[anchor] = true;
            let mut path = vec![anchor];
            walk(ctx, anchor, anchor, &mut path, C64::new(1.0, 0.0));
            ctx.used[anchor] = false;
        }
    }

    let mut ctx = Ctx {
        double,
        amp: &amp,
        used: vec![false; n2],
        cycles: Vec::new(),
        out: Vec::new(),
        total_len: 0,
        total_amp: C64::new(1.0, 0.0),
    };
    start_cycles(&mut ctx, 0);
    out.extend(ctx.out);
    Ok(out)
}

fn leading_scattering_data(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
) -> (Vec<CMat>, Vec<Vec<usize>>) {
    let n = graph.n_edges();
    let slots = graph.vertex_slots();
    let channels: Vec<Vec<usize>> = slots
        .iter()
        .map(|sv| {
            sv.iter()
                .map(|&s| if s % 2 == 0 { s / 2 } else { s / 2 + n })
                .collect()
        })
        .collect();
    let sigma0: Vec<CMat> = couplings.iter().map(|c| c.scattering_leading_term()).collect();
    (sigma0, channels)
}

/// Orbit-expansion abscissa polynomial. The raw expansion in z = e^{-c0}
/// is flipped so that the coefficient of y^{2N - L} collects the pseudo
/// orbits of total length L (y^{2N}: empty orbit; y^0: full cover).
pub fn orbit_polynomial(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
) -> Result<AbscissaPolynomial, OrbitError> {
    require_unit_equilateral(graph)?;
    let double = graph.directed_double();
    let (sigma0, channels) = leading_scattering_data(graph, couplings);
    let orbits = enumerate_pseudo_orbits(&double, &sigma0, &channels)?;
    let n2 = double.n_directed();
    let mut coeffs = vec![C64::new(0.0, 0.0); n2 + 1];
    let damping_avgs: Vec<f64> = graph.edges().iter().map(|e| e.damping.average()).collect();
    for po in &orbits {
        let mut damp = 0.0;
        for cyc in &po.orbits {
            for &d in cyc {
                damp += damping_avgs[double.parent(d)];
            }
        }
        let sign = if po.m % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[n2 - po.length] += po.amplitude * sign * (-damp).exp();
    }
    Ok(normalize_poly(coeffs, Provenance::OrbitExpansion, n2))
}

/// Rescale raw y-coefficients into the t = y/radius variable with
/// radius = |c_0 / c_(2N)|^(1/2N), normalize to max |coeff| = 1, and zero
/// out coefficients below 1e-10 of the largest.
fn normalize_poly(coeffs: Vec<C64>, provenance: Provenance, n2: usize) -> AbscissaPolynomial {
    let lead = coeffs[n2].norm();
    let constant = coeffs[0].norm();
    assert!(
        lead > 0.0 && constant > 0.0,
        "abscissa polynomial must have nonzero end coefficients (unitary leading scattering)"
    );
    let radius = (constant / lead).powf(1.0 / n2 as f64);
    let rescaled: Vec<C64> = coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c * radius.powi(k as i32))
        .collect();
    let mx = rescaled.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scaled: Vec<C64> = rescaled.iter().map(|&c| c / mx).collect();
    AbscissaPolynomial {
        poly: CPoly::new(scaled).cleaned(1e-10),
        radius,
        ln_scale: mx.ln(),
        provenance,
        n_directed: n2,
    }
}

/// Leading-order bond transfer matrix M = W J Sigma0 with
/// W = diag(e^{-abar_e}) over directed edges; the abscissa polynomial is
/// det(M - y I) up to sign, evaluated here by interpolation on the circle
/// |y| = rho with rho = |det M|^{1/2N} (geometric mean of root moduli).
pub fn characteristic_polynomial(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
) -> Result<AbscissaPolynomial, OrbitError> {
    require_unit_equilateral(graph)?;
    let n = graph.n_edges();
    let n2 = 2 * n;
    let (sigma0, channels) = leading_scattering_data(graph, couplings);
    // Sigma0 global, then M[d, c] = w_d * Sigma0[rev(d), c]
    let mut sig = CMat::zeros(n2, n2);
    for (v, ch) in channels.iter().enumerate() {
        for (i, &di) in ch.iter().enumerate() {
            for (j, &dj) in ch.iter().enumerate() {
                sig[(di, dj)] = sigma0[v][(i, j)];
            }
        }
    }
    let mut m = CMat::zeros(n2, n2);
    for d in 0..n2 {
        let w = (-graph.edges()[d % n].damping.average()).exp();
        let rev = (d + n) % n2;
        for c in 0..n2 {
            m[(d, c)] = sig[(rev, c)] * w;
        }
    }
    // rho from the scaled determinant: |det M| = prod |roots|
    let det = det_scaled(m.clone());
    assert!(
        !det.is_zero(),
        "leading scattering matrix is unitary up to weights; det cannot vanish"
    );
    let rho = (det.ln_mag / n2 as f64).exp();
    // interpolate q(t) = det(rho t I - M) at the (2N+1)-st roots of unity
    let nodes = n2 + 1;
    let vals = crate::par::par_map((0..nodes).collect::<Vec<_>>(), |k| {
        let t = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
        let y = t * rho;
        let mut a = m.clone().scale(C64::new(-1.0, 0.0));
        for i in 0..n2 {
            a[(i, i)] += y;
        }
        // common exponent: factor rho out of every row
        let lu = lu_factor(a);
        lu.det_scaled().shift(-(n2 as f64) * rho.ln())
    });
    // inverse DFT for the coefficients of q in t; they stay O(1) scaled
    let base = vals
        .iter()
        .map(|v| v.ln_mag)
        .fold(f64::NEG_INFINITY, f64::max);
    let plain: Vec<C64> = vals.iter().map(|v| v.value_rel(base)).collect();
    let mut coeffs_t = vec![C64::new(0.0, 0.0); nodes];
    for (mcoef, ct) in coeffs_t.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (k, val) in plain.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * mcoef) as f64 / nodes as f64;
            acc += val * C64::from_polar(1.0, ang);
        }
        *ct = acc / nodes as f64;
    }
    coeffs_t.truncate(n2 + 1);
    // q(t) = sum ct_m t^m; in y = rho t: coefficient of y^m is ct_m / rho^m,
    // all times e^{base}. Return in the same scaled-variable basis as the
    // orbit polynomial: convert to plain y powers.
    // the same radius definition as normalize_poly, computed without ever
    // leaving the scaled space (raw-y coefficients overflow f64 for
    // strongly damped graphs)
    let radius = rho * (coeffs_t[0].norm() / coeffs_t[n2].norm()).powf(1.0 / n2 as f64);
    let r = radius / rho;
    let rescaled: Vec<C64> = coeffs_t
        .iter()
        .enumerate()
        .map(|(k, &ct)| ct * r.powi(k as i32))
        .collect();
    let mx = rescaled.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scaled: Vec<C64> = rescaled.iter().map(|&c| c / mx).collect();
    Ok(AbscissaPolynomial {
        poly: CPoly::new(scaled).cleaned(1e-10),
        radius,
        ln_scale: mx.ln() + base,
        provenance: Provenance::Characteristic,
        n_directed: n2,
    })
}

/// Roots, c0 values, and clustered real parts with weights.
pub fn abscissa_report(
    polynomial: &AbscissaPolynomial,
    cluster_tol: f64,
) -> Result<AbscissaReport, OrbitError> {
    if polynomial.poly.max_coeff() == 0.0 {
        return Err(OrbitError::ZeroPolynomial);
    }
    let roots_y = polynomial.roots_y();
    let c0_values: Vec<C64> = roots_y
        .iter()
        .map(|y| C64::new(y.norm().ln(), y.arg()))
        .collect();
    let reals: Vec<f64> = c0_values.iter().map(|c| c.re).collect();
    let n2 = polynomial.n_directed;
    let clusters = cluster_reals(&reals, cluster_tol)
        .into_iter()
        .map(|(c, k)| AbscissaCluster {
            c,
            multiplicity: k,
            mu: (k, n2),
        })
        .collect();
    Ok(AbscissaReport {
        polynomial: polynomial.clone(),
        roots_y,
        c0_values,
        clusters,
        cluster_tol,
    })
}

/// Closed-form vertex factor of the local pseudo-orbit sum at a standard
/// vertex of degree d with v edges in play (sign certified by the
/// exhaustive oracle): A_X = -s1^v (s-1)^{v-1} [(v-1) s + 1], s = 2/(2-d).
pub fn vertex_coefficient(degree: usize, v: usize) -> f64 {
    assert!(v >= 1 && v <= degree);
    let d = degree as f64;
    if degree == 2 {
        // s is singular at d = 2; the direct limit is total transparency:
        // only the nonreflecting pairing survives with amplitude 1, sign by
        // the single-cycle count
        return if v == 1 { -1.0 } else { 0.0 };
    }
    let s1 = 2.0 / d - 1.0;
    let s = 2.0 / (2.0 - d);
    -s1.powi(v as i32) * (s - 1.0).powi(v as i32 - 1) * ((v as f64 - 1.0) * s + 1.0)
}

/// Exhaustive oracle for the vertex factor: sum over all pairings pi of the
/// v incoming to v outgoing edges of (-1)^{cycles(pi)} s1^{fix} s2^{v-fix}.
pub fn vertex_coefficient_oracle(degree: usize, v: usize) -> f64 {
    assert!(v >= 1 && v <= degree && v <= 8);
    let d = degree as f64;
    let s1 = 2.0 / d - 1.0;
    let s2 = 2.0 / d;
    let mut perm: Vec<usize> = (0..v).collect();
    let mut total = 0.0;
    permute(&mut perm, 0, &mut |p| {
        let mut seen = vec![false; v];
        let mut cycles = 0usize;
        let mut fixed = 0usize;
        for start in 0..v {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                if p[i] == i {
                    fixed += 1;
                }
                i = p[i];
            }
        }
        let sign = if cycles % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * s1.powi(fixed as i32) * s2.powi((v - fixed) as i32);
    });
    total
}

/// Nonreflecting pseudo-orbit count g(v): permutations without fixed
/// points, signed by (-1)^cycles.
pub fn nonreflecting_count(v: usize) -> i64 {
    assert!(v >= 2 && v <= 8);
    let mut perm: Vec<usize> = (0..v).collect();
    let mut total = 0i64;
    permute(&mut perm, 0, &mut |p| {
        if p.iter().enumerate().any(|(i, &pi)| pi == i) {
            return;
        }
        let mut seen = vec![false; v];
        let mut cycles = 0usize;
        for start in 0..v {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = p[i];
            }
        }
        total += if cycles % 2 == 0 { 1 } else { -1 };
    });
    total
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Damping assignment that realizes at least N distinct abscissas on a tree
/// with all-odd degrees: a_j = (N + 1 - j) * separation on the j-th edge
/// (so a_1 is the largest), plus the predicted abscissas
/// c0_j ~ -a_j + log(-C_{j-1}/C_j)/2 from the orbit coefficients.
#[derive(Debug, Clone)]
pub struct TreeDampingPlan {
    pub dampings: Vec<f64>,
    pub predicted_c0: Vec<f64>,
}

pub fn tree_max_abscissas_damping(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
    separation: f64,
) -> Result<TreeDampingPlan, OrbitError> {
    require_unit_equilateral(graph)?;
    let n = graph.n_edges();
    if graph.n_vertices() != n + 1 {
        return Err(OrbitError::NotATree);
    }
    for (v, d) in graph.degrees().iter().enumerate() {
        if d % 2 == 0 {
            return Err(OrbitError::EvenDegree(
                graph.vertex_ids()[v].clone(),
                *d,
            ));
        }
    }
    let dampings: Vec<f64> = (0..n).map(|j| (n - j) as f64 * separation).collect();
    // Orbit expansion with zero damping, bucketed by support set: C_j is the
    // signed amplitude sum over pseudo orbits covering exactly the first j
    // edges in both directions.
    let double = graph.directed_double();
    let (sigma0, channels) = leading_scattering_data(graph, couplings);
    let orbits = enumerate_pseudo_orbits(&double, &sigma0, &channels)?;
    let mut support_sum = std::collections::HashMap::<u32, f64>::new();
    for po in &orbits {
        let mut mask = 0u32;
        let mut count = 0usize;
        for cyc in &po.orbits {
            for &d in cyc {
                mask |= 1 << d;
                count += 1;
            }
        }
        // full double cover of a subset uses each directed edge once
        let subset: u32 = {
            let lower = mask & ((1 << n) - 1);
            let upper = mask >> n;
            if lower != upper || count != 2 * lower.count_ones() as usize {
                continue;
            }
            lower
        };
        let sign = if po.m % 2 == 0 { 1.0 } else { -1.0 };
        *support_sum.entry(subset).or_insert(0.0) += sign * po.amplitude.re;
    }
    // C_j covers the N - j least-damped edges {e_{j+1}, ..., e_N}; with
    // dampings sorted descending these dominate the y^j coefficient
    let mut c_coeffs = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let full = ((1u64 << n) - 1) as u32;
        let low = ((1u64 << j) - 1) as u32;
        c_coeffs.push(*support_sum.get(&(full & !low)).unwrap_or(&0.0));
    }
    let mut predicted = Vec::with_capacity(n);
    for j in 1..=n {
        if c_coeffs[j] == 0.0 {
            return Err(OrbitError::ZeroPolynomial);
        }
        let ratio = (c_coeffs[j - 1] / c_coeffs[j]).abs();
        predicted.push(-dampings[j - 1] + 0.5 * ratio.ln());
    }
    Ok(TreeDampingPlan {
        dampings,
        predicted_c0: predicted,
    })
}

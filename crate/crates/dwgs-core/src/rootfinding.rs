//! Locate all zeros of a scaled secular determinant in a rectangular
//! complex window: argument-principle counting on the boundary, recursive
//! quadrisection, derivative-free Newton, multiplicities.

use crate::linalg::C64;
use crate::par::par_map;
use crate::scaled::Scaled;
use crate::secular::{SecularError, SecularSystem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RootError {
    #[error(transparent)]
    Secular(#[from] SecularError),
    #[error("phase tracking failed on the window boundary after {0} refinements")]
    PhaseTracking(usize),
    #[error("window nudging exhausted (zero stuck on boundary)")]
    NudgeExhausted,
    #[error("newton failed to converge near {0}")]
    NewtonStalled(C64),
    #[error("winding number not an integer: {0}")]
    NonIntegerWinding(f64),
}

/// Rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ComplexWindow {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> ComplexWindow {
        assert!(re_min < re_max && im_min < im_max, "empty window");
        ComplexWindow {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn center(&self) -> C64 {
        C64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn diameter(&self) -> f64 {
        let dr = self.re_max - self.re_min;
        let di = self.im_max - self.im_min;
        (dr * dr + di * di).sqrt()
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }

    /// Partition into four boxes cutting at the given interior point.
    fn quadrants_at(&self, cut_re: f64, cut_im: f64) -> [ComplexWindow; 4] {
        [
            ComplexWindow::new(self.re_min, cut_re, self.im_min, cut_im),
            ComplexWindow::new(cut_re, self.re_max, self.im_min, cut_im),
            ComplexWindow::new(self.re_min, cut_re, cut_im, self.im_max),
            ComplexWindow::new(cut_re, self.re_max, cut_im, self.im_max),
        ]
    }

    fn nudged(&self, delta: f64) -> ComplexWindow {
        ComplexWindow {
            re_min: self.re_min - delta,
            re_max: self.re_max + delta * 0.61803398875,
            im_min: self.im_min - delta * 0.38196601125,
            im_max: self.im_max + delta,
        }
    }
}

/// One located eigenvalue.
#[derive(Debug, Clone)]
pub struct Root {
    pub lambda: C64,
    pub multiplicity: usize,
    /// Newton-step residual |f / f'| of the solving backend (distance scale).
    pub residual: f64,
    /// Same residual evaluated in the other backend, when requested.
    pub backend_residual: Option<f64>,
}

/// Eigenvalues found in a window, sorted by (Im, Re).
#[derive(Debug, Clone)]
pub struct EigenvalueSet {
    pub window: ComplexWindow,
    pub roots: Vec<Root>,
    pub total_multiplicity: usize,
}

impl EigenvalueSet {
    pub fn lambdas(&self) -> Vec<C64> {
        self.roots.iter().map(|r| r.lambda).collect()
    }
}

const MAX_BOUNDARY_POINTS: usize = 1 << 17;
const PHASE_STEP: f64 = std::f64::consts::FRAC_PI_4;

/// Winding number of the determinant around the window boundary, by
/// adaptive sampling with phase-continuity control (max step pi/4).
pub fn count_zeros(system: &SecularSystem, window: &ComplexWindow) -> Result<usize, RootError> {
    let (count, _) = count_zeros_nudged(system, window)?;
    Ok(count)
}

/// Counting with deterministic golden-ratio boundary nudging when a zero
/// sits too close to the boundary; returns the window actually used.
pub fn count_zeros_nudged(
    system: &SecularSystem,
    window: &ComplexWindow,
) -> Result<(usize, ComplexWindow), RootError> {
    let mut delta = 0.0;
    for attempt in 0..8 {
        let w = if attempt == 0 {
            *window
        } else {
            window.nudged(delta)
        };
        match winding_number(system, &w) {
            Ok(wind) => {
                let rounded = wind.round();
                if (wind - rounded).abs() > 0.05 {
                    return Err(RootError::NonIntegerWinding(wind));
                }
                return Ok((rounded.max(0.0) as usize, w));
            }
            Err(RootError::PhaseTracking(_)) => {
                delta = if delta == 0.0 { 1e-4 } else { delta * 2.2360679 };
                if delta > 1e-2 {
                    return Err(RootError::NudgeExhausted);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(RootError::NudgeExhausted)
}

fn winding_number(system: &SecularSystem, window: &ComplexWindow) -> Result<f64, RootError> {
    let corners = window.corners();
    // The determinant's smooth phase rate along the boundary is bounded by
    // roughly the total metric length (each edge contributes |lt' l| ~ l).
    // Under-sampling that rate can alias a full turn past the pi/4 step
    // criterion, so the initial spacing resolves it with margin.
    let rate = system.graph.total_length() + 2.0;
    let mut points: Vec<C64> = Vec::new();
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        let len = (b - a).norm();
        let steps = ((len * rate).ceil() as usize).clamp(8, 16384);
        for i in 0..steps {
            points.push(a + (b - a) * (i as f64 / steps as f64));
        }
    }
    points.push(points[0]);
    let mut vals: Vec<Scaled> = par_map(points.clone(), |z| {
        system.determinant(z).unwrap_or(Scaled::ZERO)
    });
    for v in &vals {
        if v.is_zero() {
            return Err(RootError::PhaseTracking(0));
        }
    }

    fn total_phase(vals: &[Scaled]) -> f64 {
        let mut total = 0.0;
        for i in 0..vals.len() - 1 {
            total += phase_delta(&vals[i], &vals[i + 1]);
        }
        total / (2.0 * std::f64::consts::PI)
    }

    // phase-continuity refinement; `force_all` subdivides every segment
    let refine = |points: &mut Vec<C64>,
                  vals: &mut Vec<Scaled>,
                  force_all: bool|
     -> Result<bool, RootError> {
        let mut inserts: Vec<(usize, C64)> = Vec::new();
        for i in 0..points.len() - 1 {
            let dphi = phase_delta(&vals[i], &vals[i + 1]);
            if force_all || dphi.abs() > PHASE_STEP {
                inserts.push((i + 1, (points[i] + points[i + 1]) * 0.5));
            }
        }
        if inserts.is_empty() {
            return Ok(false);
        }
        if points.len() + inserts.len() > MAX_BOUNDARY_POINTS {
            return Err(RootError::PhaseTracking(points.len()));
        }
        let new_vals = par_map(inserts.iter().map(|(_, z)| *z).collect::<Vec<_>>(), |z| {
            system.determinant(z).unwrap_or(Scaled::ZERO)
        });
        for ((at, z), v) in inserts.into_iter().zip(new_vals.into_iter()).rev() {
            if v.is_zero() {
                return Err(RootError::PhaseTracking(points.len()));
            }
            points.insert(at, z);
            vals.insert(at, v);
        }
        Ok(true)
    };

    let converge = |points: &mut Vec<C64>, vals: &mut Vec<Scaled>| -> Result<(), RootError> {
        for round in 0..28 {
            if !refine(points, vals, false)? {
                return Ok(());
            }
            let _ = round;
        }
        Err(RootError::PhaseTracking(points.len()))
    };

    // converge, then audit by a forced global subdivision: an aliased
    // segment reveals itself when the halves disagree with the whole
    converge(&mut points, &mut vals)?;
    let mut winding = total_phase(&vals);
    for _ in 0..3 {
        refine(&mut points, &mut vals, true)?;
        converge(&mut points, &mut vals)?;
        let next = total_phase(&vals);
        if (next - winding).abs() < 0.01 {
            return Ok(next);
        }
        winding = next;
    }
    Err(RootError::PhaseTracking(points.len()))
}

fn phase_delta(a: &Scaled, b: &Scaled) -> f64 {
    // arg(b/a) in (-pi, pi]
    (b.phase * a.phase.conj()).arg()
}

/// Derivative-free Newton from `start`; central differences, relative step
/// 1e-7, steps clamped to the `trust` radius around the start point.
/// Returns (root, residual).
pub fn newton_refine(
    system: &SecularSystem,
    start: C64,
    tol: f64,
    trust: f64,
) -> Result<(C64, f64), RootError> {
    let mut z = start;
    let mut last_step = f64::INFINITY;
    let mut pullbacks = 0usize;
    for iter in 0..100 {
        let h = 1e-7 * (1.0 + z.norm());
        let f0 = system.determinant(z)?;
        let fp = system.determinant(z + h)?;
        let fm = system.determinant(z - h)?;
        let base = fp.ln_mag.max(fm.ln_mag).max(f0.ln_mag);
        let d = (fp.value_rel(base) - fm.value_rel(base)) / (2.0 * h);
        if d.norm() == 0.0 {
            return Err(RootError::NewtonStalled(z));
        }
        let mut step = f0.value_rel(base) / d;
        if step.norm() > 0.5 * trust {
            step *= 0.5 * trust / step.norm();
        }
        z -= step;
        if (z - start).norm() > trust {
            // walked out of the certified region: pull back to its edge,
            // and give up quickly if it keeps pushing outward
            z = start + (z - start) * (trust / (z - start).norm());
            pullbacks += 1;
            if pullbacks > 3 {
                return Err(RootError::NewtonStalled(z));
            }
        }
        let s = step.norm();
        if s < tol * 0.01 {
            return Ok((z, system.newton_residual(z)?));
        }
        // bisection-flavoured damping when the step estimate stops shrinking
        if iter > 40 && s > last_step * 0.9 {
            z += step * 0.5;
        }
        last_step = s;
    }
    let res = system.newton_residual(z)?;
    if res < tol {
        Ok((z, res))
    } else {
        Err(RootError::NewtonStalled(z))
    }
}

/// Split a box into four with an interior cut, trying golden-ratio offsets
/// around the midpoint until every sub-count succeeds and the partition is
/// conservative (children must sum to the parent: the cut stays interior,
/// so this is exact unless a zero hugs the cut line).
fn split_counted(
    system: &SecularSystem,
    w: &ComplexWindow,
    c: usize,
) -> Result<Vec<(ComplexWindow, usize)>, RootError> {
    const OFFSETS: [f64; 7] = [0.0, 0.0618, -0.0618, 0.1236, -0.1236, 0.2, -0.2];
    let width = w.re_max - w.re_min;
    let height = w.im_max - w.im_min;
    let rm = 0.5 * (w.re_min + w.re_max);
    let im = 0.5 * (w.im_min + w.im_max);
    for (k, &off) in OFFSETS.iter().enumerate() {
        let cut_re = rm + off * width;
        let cut_im = im + OFFSETS[(k + 3) % OFFSETS.len()] * height;
        let quads = w.quadrants_at(cut_re, cut_im);
        let counts = par_map(quads.to_vec(), |q| winding_number(system, &q));
        let mut resolved = Vec::with_capacity(4);
        let mut acc = 0usize;
        let mut ok = true;
        for (q, res) in quads.iter().zip(counts.into_iter()) {
            match res {
                Ok(wind) => {
                    let rounded = wind.round();
                    if (wind - rounded).abs() > 0.05 {
                        ok = false;
                        break;
                    }
                    let cnt = rounded.max(0.0) as usize;
                    acc += cnt;
                    resolved.push((*q, cnt));
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && acc == c {
            return Ok(resolved);
        }
    }
    Err(RootError::NudgeExhausted)
}

/// Shrink a box certified to hold exactly one zero until its diameter is
/// below `target`, by repeated counted splits.
fn isolate_single(
    system: &SecularSystem,
    mut w: ComplexWindow,
    target: f64,
) -> Result<ComplexWindow, RootError> {
    while w.diameter() > target {
        let parts = split_counted(system, &w, 1)?;
        let Some((sub, _)) = parts.into_iter().find(|(_, c)| *c == 1) else {
            return Err(RootError::NudgeExhausted);
        };
        w = sub;
    }
    Ok(w)
}

/// Find all zeros with multiplicities in the window.
///
/// Recursive quadrisection until each box holds at most one zero (or is
/// smaller than 10 tol), then Newton from the box center; clusters within
/// 100 tol are merged and the argument principle arbitrates multiplicity.
/// The total multiplicity equals the argument-principle count exactly.
pub fn find_roots(
    system: &SecularSystem,
    window: &ComplexWindow,
    tol: f64,
) -> Result<EigenvalueSet, RootError> {
    let (total, used_window) = count_zeros_nudged(system, window)?;
    let mut leaves: Vec<(ComplexWindow, usize)> = Vec::new();
    let mut stack = vec![(used_window, total)];
    while let Some((w, c)) = stack.pop() {
        if c == 0 {
            continue;
        }
        if c == 1 || w.diameter() < tol * 10.0 {
            leaves.push((w, c));
            continue;
        }
        stack.extend(split_counted(system, &w, c)?);
    }

    // Newton from each leaf center. A count-1 leaf owns its root: a
    // refinement that leaves the box converged into a neighbour's basin,
    // so shrink the box around the certified zero and retry.
    let refined = par_map(leaves.clone(), |(w, cnt)| -> Result<(C64, f64, usize), RootError> {
        let first = newton_refine(system, w.center(), tol, 1.2 * w.diameter());
        match first {
            Ok((z, r)) if cnt > 1 || w.contains(z) => return Ok((z, r, cnt)),
            _ if cnt > 1 => return first.map(|(z, r)| (z, r, cnt)),
            _ => {}
        }
        // stalled or escaped: shrink the certified box around the zero
        // until Newton has a short, safe path
        let mut boxed = w;
        let mut target = 0.2 * w.diameter();
        let mut last_err = RootError::NewtonStalled(w.center());
        for _ in 0..8 {
            boxed = isolate_single(system, boxed, target.max(tol * 100.0))?;
            match newton_refine(system, boxed.center(), tol, 2.0 * boxed.diameter()) {
                Ok((z, r)) if boxed.contains(z) || boxed.diameter() <= tol * 200.0 => {
                    return Ok((z, r, cnt));
                }
                Ok(_) => {}
                Err(e) => last_err = e,
            }
            if boxed.diameter() <= tol * 200.0 {
                break;
            }
            target *= 0.2;
        }
        Err(last_err)
    });
    let mut candidates: Vec<(C64, f64, usize)> = Vec::new();
    for r in refined {
        candidates.push(r?);
    }
    // merge clusters within 100 tol
    let merge_radius = tol * 100.0;
    let mut merged: Vec<(C64, f64, usize)> = Vec::new();
    for (z, res, cnt) in candidates {
        if let Some(m) = merged
            .iter_mut()
            .find(|(mz, _, _)| (*mz - z).norm() < merge_radius)
        {
            m.2 += cnt;
            m.1 = m.1.min(res);
        } else {
            merged.push((z, res, cnt));
        }
    }
    // arbitrate multiplicities of collapsed clusters by a local count
    let mut roots = Vec::new();
    let mut sum = 0usize;
    for (z, res, cnt) in merged {
        let mult = if cnt > 1 {
            let r = (merge_radius * 2.0).max(tol * 4.0);
            let local = ComplexWindow::new(z.re - r, z.re + r, z.im - r, z.im + r);
            count_zeros_nudged(system, &local).map(|(c, _)| c).unwrap_or(cnt)
        } else {
            cnt
        };
        sum += mult;
        roots.push(Root {
            lambda: z,
            multiplicity: mult,
            residual: res,
            backend_residual: None,
        });
    }
    if sum != total {
        return Err(RootError::NonIntegerWinding(sum as f64 - total as f64));
    }
    roots.sort_by(|a, b| {
        (a.lambda.im, a.lambda.re)
            .partial_cmp(&(b.lambda.im, b.lambda.re))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(EigenvalueSet {
        window: used_window,
        roots,
        total_multiplicity: sum,
    })
}

/// Attach other-backend residuals to each root.
pub fn certify_with_backend(
    set: &mut EigenvalueSet,
    other: &SecularSystem,
) -> Result<(), RootError> {
    for root in set.roots.iter_mut() {
        root.backend_residual = Some(other.newton_residual(root.lambda)?);
    }
    Ok(())
}

/// Fit of a tracked eigenvalue sequence lambda_n ~ 2 pi i n + c0 + c1/n.
#[derive(Debug, Clone)]
pub struct SequenceFit {
    pub lambdas: Vec<(u32, C64)>,
    pub c0: C64,
    pub c1_over_n: C64,
}

/// Follow the sequence lambda_n = 2 pi i n + c0 + O(1/n) by Newton from
/// the asymptotic guess, for n in `n_range`, and fit (c0, c1) by least
/// squares of lambda_n - 2 pi i n against {1, 1/n}.
pub fn track_sequence(
    system: &SecularSystem,
    c0_guess: C64,
    n_range: std::ops::RangeInclusive<u32>,
    tol: f64,
) -> Result<SequenceFit, RootError> {
    let ns: Vec<u32> = n_range.collect();
    let refined = par_map(ns.clone(), |n| {
        let start = C64::new(0.0, 2.0 * std::f64::consts::PI * n as f64) + c0_guess;
        newton_refine(system, start, tol, 1.0).map(|(z, _)| (n, z))
    });
    let mut lambdas = Vec::new();
    for r in refined {
        lambdas.push(r?);
    }
    // detect sequence jumps: two n converging to the same root
    for w in lambdas.windows(2) {
        if (w[0].1 - w[1].1).norm() < tol * 10.0 {
            return Err(RootError::NewtonStalled(w[0].1));
        }
    }
    // least squares on y_n = lambda_n - 2 pi i n = c0 + c1 / n
    let m = lambdas.len() as f64;
    let (mut s1, mut s2, mut sy, mut syx) = (0.0f64, 0.0f64, C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for &(n, lam) in &lambdas {
        let x = 1.0 / n as f64;
        let y = lam - C64::new(0.0, 2.0 * std::f64::consts::PI * n as f64);
        s1 += x;
        s2 += x * x;
        sy += y;
        syx += y * x;
    }
    let det = m * s2 - s1 * s1;
    let c0 = (sy * s2 - syx * s1) / det;
    let c1 = (syx * m - sy * s1) / det;
    Ok(SequenceFit {
        lambdas,
        c0,
        c1_over_n: c1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{named_coupling, CouplingKind};
    use crate::graph::{Edge, MetricGraph};
    use crate::profile::CoefficientProfile;
    use crate::secular::Backend;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dirichlet_edge(a: f64) -> SecularSystem {
        let g = MetricGraph::new(
            vec!["v0".into(), "v1".into()],
            vec![Edge {
                id: "e".into(),
                tail: 0,
                head: 1,
                length: 1.0,
                damping: CoefficientProfile::constant(a, 1.0),
                potential: CoefficientProfile::constant(0.0, 1.0),
            }],
        )
        .unwrap();
        let cs = vec![
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
        ];
        SecularSystem::new(g, cs, Backend::Flower).unwrap()
    }

    #[test]
    fn undamped_string_count() {
        let sys = dirichlet_edge(0.0);
        let w = ComplexWindow::new(-1.0, 1.0, 0.5 * std::f64::consts::PI, 3.5 * std::f64::consts::PI);
        assert_eq!(count_zeros(&sys, &w).unwrap(), 3);
    }

    #[test]
    fn damped_string_count_window() {
        // a = 1: roots -1 + i sqrt(k^2 pi^2 - 1); count those below 20
        let sys = dirichlet_edge(1.0);
        let w = ComplexWindow::new(-2.0, 0.0, 0.0, 20.0);
        assert_eq!(count_zeros(&sys, &w).unwrap(), 6);
    }

    #[test]
    fn find_roots_damped_string() {
        let sys = dirichlet_edge(1.0);
        let w = ComplexWindow::new(-2.0, 0.0, 5.0, 7.0);
        let set = find_roots(&sys, &w, 1e-8).unwrap();
        assert_eq!(set.total_multiplicity, 1);
        let want = c(-1.0, (4.0 * std::f64::consts::PI.powi(2) - 1.0).sqrt());
        assert!((set.roots[0].lambda - want).norm() < 1e-7, "{:?}", set.roots);
        assert!(set.roots[0].residual < 1e-8);
    }

    #[test]
    fn empty_window_below_first_branch() {
        let sys = dirichlet_edge(1.0);
        let w = ComplexWindow::new(-0.5, -0.4, 0.5, 1.0);
        let set = find_roots(&sys, &w, 1e-8).unwrap();
        assert!(set.roots.is_empty());
    }

    #[test]
    fn track_sequence_fits_damped_string() {
        // lambda_n = -1 + i sqrt(n^2 pi^2 - 1) for the Dirichlet string:
        // in 2 pi periodicity terms, the two sequences have c0 = -1 with
        // Im offsets; track from c0 = -1 and check fitted Re c0
        let sys = dirichlet_edge(1.0);
        let fit = track_sequence(&sys, c(-1.0, 0.0), 20..=60, 1e-9).unwrap();
        assert!(
            (fit.c0.re + 1.0).abs() < 1e-4,
            "fitted c0 = {} (want Re = -1)",
            fit.c0
        );
    }

    #[test]
    fn undamped_fitted_c0_is_imaginary() {
        let sys = dirichlet_edge(0.0);
        let fit = track_sequence(&sys, c(0.0, 0.0), 20..=40, 1e-9).unwrap();
        assert!(fit.c0.re.abs() < 1e-6);
    }
}

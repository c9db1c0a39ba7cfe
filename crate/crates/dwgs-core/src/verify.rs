//! The bundled verification battery behind `dwgs verify` and the
//! acceptance suite: every structural identity the computed spectra must
//! satisfy, evaluated on one graph.

use crate::analysis::{counting_slope, eigenfunction_at, rayleigh_identity_residual};
use crate::coupling::UnitaryCoupling;
use crate::graph::MetricGraph;
use crate::pipeline::{abscissa_pipeline, reduce_to_unit, PipelineError};
use crate::rootfinding::{certify_with_backend, find_roots, track_sequence, ComplexWindow};
use crate::secular::{Backend, SecularSystem};

#[derive(Debug, Clone)]
pub struct VerifyItem {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub items: Vec<VerifyItem>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed || i.skipped)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.items.push(VerifyItem {
            name: name.to_string(),
            passed,
            skipped: false,
            detail,
        });
    }

    fn skip(&mut self, name: &str, detail: String) {
        self.items.push(VerifyItem {
            name: name.to_string(),
            passed: true,
            skipped: true,
            detail,
        });
    }
}

pub struct VerifyConfig {
    /// which 2 pi period of the unit system to use for the root window
    pub period_index: u32,
    pub tol: f64,
    /// n-range for the counting-function fit
    pub counting_range: (u32, u32),
}

impl Default for VerifyConfig {
    fn default() -> VerifyConfig {
        VerifyConfig {
            period_index: 8,
            tol: 1e-8,
            counting_range: (20, 60),
        }
    }
}

/// Run the full battery. Items that need the unit reduction (polynomials,
/// parity, weights) are skipped for incommensurate graphs, as the theory
/// only covers commensurate lengths there.
pub fn run_all(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
    config: &VerifyConfig,
) -> VerifyReport {
    let mut report = VerifyReport { items: Vec::new() };

    let validation = graph.validate();
    report.push(
        "graph-validation",
        validation.is_valid(),
        format!(
            "degrees {:?}, total length {:.6}",
            validation.degrees, validation.total_length
        ),
    );
    if !validation.is_valid() {
        for e in &validation.errors {
            report.push("graph-validation-error", false, e.to_string());
        }
        return report;
    }

    // root window: a 2 pi band at moderate frequency in original units
    // (for unit graphs this is exactly one asymptotic period)
    let reduction = reduce_to_unit(graph, couplings);
    let (lo_a, hi_a) = graph.average_damping_bounds();
    let pi = std::f64::consts::PI;
    let center = 2.0 * pi * config.period_index as f64;
    let window = ComplexWindow::new(
        -hi_a - 1.0,
        -lo_a.min(0.0) + 1.0,
        center - pi,
        center + pi,
    );

    let flower = match SecularSystem::new(graph.clone(), couplings.to_vec(), Backend::Flower) {
        Ok(s) => s,
        Err(e) => {
            report.push("secular-system", false, e.to_string());
            return report;
        }
    };
    let scattering = flower.with_backend(Backend::Scattering);

    let set = match find_roots(&flower, &window, config.tol) {
        Ok(mut set) => {
            let certified = certify_with_backend(&mut set, &scattering);
            report.push(
                "argument-principle-completeness",
                certified.is_ok(),
                format!(
                    "{} roots, total multiplicity {}",
                    set.roots.len(),
                    set.total_multiplicity
                ),
            );
            Some(set)
        }
        Err(e) => {
            report.push("root-finding", false, e.to_string());
            None
        }
    };

    if let Some(set) = &set {
        let worst = set
            .roots
            .iter()
            .filter_map(|r| r.backend_residual)
            .fold(0.0f64, f64::max);
        report.push(
            "dual-backend-zero-agreement",
            worst < 1e-6,
            format!("max scattering residual at flower roots: {worst:.2e}"),
        );

        // finite-frequency eigenvalues obey the pointwise damping range
        // (the weighted-average identity forces it); the edge-average
        // interval is the high-frequency statement, checked on abscissas
        let (lo_pt, hi_pt) = graph
            .edges()
            .iter()
            .map(|e| e.damping.value_range())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (l, h)| {
                (lo.min(l), hi.max(h))
            });
        let mut bound_ok = true;
        let mut worst_bound: f64 = 0.0;
        for r in &set.roots {
            if r.lambda.im.abs() > 1e-6 {
                let excess = (-(r.lambda.re) - hi_pt).max(lo_pt - (-(r.lambda.re))).max(0.0);
                worst_bound = worst_bound.max(excess);
                if excess > 1e-9 {
                    bound_ok = false;
                }
            }
        }
        report.push(
            "damping-range-bound",
            bound_ok,
            format!("Re in [{:.4}, {:.4}], worst excess {worst_bound:.2e}", -hi_pt, -lo_pt),
        );

        let mut worst_rayleigh: f64 = 0.0;
        let mut worst_sigma: f64 = 0.0;
        let mut rayleigh_ok = true;
        for r in &set.roots {
            if r.lambda.im.abs() <= 1e-6 {
                continue;
            }
            match eigenfunction_at(&flower, r.lambda) {
                Ok(ef) => {
                    worst_sigma = worst_sigma.max(ef.sigma_min);
                    match rayleigh_identity_residual(&flower, &ef) {
                        Ok(res) => {
                            worst_rayleigh = worst_rayleigh.max(res);
                            if res >= 1e-6 {
                                rayleigh_ok = false;
                            }
                        }
                        Err(_) => rayleigh_ok = false,
                    }
                }
                Err(_) => rayleigh_ok = false,
            }
        }
        report.push(
            "rayleigh-identity",
            rayleigh_ok,
            format!("max residual {worst_rayleigh:.2e}, max sigma_min {worst_sigma:.2e}"),
        );

        // conjugate closure: the previously found upper-half roots must
        // reappear conjugated in the mirrored window (windows stay off the
        // real axis, where overdamped real eigenvalues would crowd the
        // contour)
        let mirror = ComplexWindow::new(
            window.re_min,
            window.re_max,
            -window.im_max - 0.02,
            -window.im_min + 0.02,
        );
        match find_roots(&flower, &mirror, config.tol) {
            Ok(lower) => {
                let mut paired = true;
                let mut checked = 0usize;
                for r in &set.roots {
                    let conj = r.lambda.conj();
                    if conj.im > mirror.im_min + 0.05 && conj.im < mirror.im_max - 0.05 {
                        checked += 1;
                        if !lower
                            .roots
                            .iter()
                            .any(|q| (q.lambda - conj).norm() < 1e-6 * (1.0 + conj.norm()))
                        {
                            paired = false;
                        }
                    }
                }
                report.push(
                    "conjugate-symmetry",
                    paired,
                    format!("{checked} conjugate pairs verified"),
                );
            }
            Err(e) => report.push("conjugate-symmetry", false, e.to_string()),
        }
    }

    match reduction {
        Err(PipelineError::Incommensurate) => {
            report.skip(
                "abscissa-polynomials",
                "incommensurate lengths: numeric spectrum only".into(),
            );
        }
        Err(e) => report.push("unit-reduction", false, e.to_string()),
        Ok(red) => {
            let n2 = 2 * red.graph.n_edges();
            match abscissa_pipeline(graph, couplings, 1e-6) {
                Err(e) => report.push("abscissa-polynomials", false, e.to_string()),
                Ok(pipe) => {
                    match pipe.method_deviation {
                        Some(dev) => report.push(
                            "dual-polynomial-identity",
                            dev <= 1e-9,
                            format!("max coefficient deviation {dev:.2e} over 2N = {n2}"),
                        ),
                        None => report.skip(
                            "dual-polynomial-identity",
                            format!("2N = {n2} beyond the orbit enumeration guard"),
                        ),
                    }
                    let total: usize = pipe.report.clusters.iter().map(|c| c.multiplicity).sum();
                    report.push(
                        "abscissa-weight-total",
                        total == n2,
                        format!("sum m_c = {total}, 2N = {n2}"),
                    );
                    let mut in_bound = true;
                    for (c, _) in pipe.original_scale_clusters() {
                        if c < -hi_a - 1e-9 || c > -lo_a + 1e-9 {
                            in_bound = false;
                        }
                    }
                    report.push(
                        "abscissa-bound",
                        in_bound,
                        format!("{} clusters", pipe.report.clusters.len()),
                    );
                    if red.graph.is_bipartite() {
                        let odd_max = pipe
                            .characteristic
                            .poly
                            .coeffs
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| k % 2 == 1)
                            .map(|(_, c)| c.norm())
                            .fold(0.0f64, f64::max);
                        report.push(
                            "bipartite-parity",
                            odd_max < 1e-10,
                            format!("max odd coefficient {odd_max:.2e}"),
                        );
                    } else {
                        report.skip("bipartite-parity", "graph is not bipartite".into());
                    }

                    // counting-function fit on the unit system from the
                    // heaviest cluster
                    let unit_sys = SecularSystem::new(
                        red.graph.clone(),
                        red.couplings.clone(),
                        Backend::Flower,
                    );
                    match unit_sys {
                        Ok(us) => {
                            // any sequence serves the slope statement; some
                            // seeds sit in narrow Newton basins, so try a few
                            let mut seeds: Vec<_> = pipe.report.c0_values.clone();
                            seeds.sort_by(|a, b| {
                                b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal)
                            });
                            let (n_lo, n_hi) = config.counting_range;
                            let mut outcome: Option<(f64, f64)> = None;
                            let mut last_err = String::new();
                            for seed_c0 in seeds.into_iter().take(4) {
                                match track_sequence(&us, seed_c0, n_lo..=n_hi, config.tol) {
                                    Ok(fit) => {
                                        // R values strictly between
                                        // consecutive tracked Im values, so
                                        // no count sits on a boundary tie
                                        let rs: Vec<f64> = fit
                                            .lambdas
                                            .windows(2)
                                            .step_by(5)
                                            .map(|w| 0.5 * (w[0].1.im + w[1].1.im))
                                            .collect();
                                        let slope = counting_slope(&fit, &rs);
                                        let want = 1.0 / (2.0 * pi);
                                        let rel = (slope - want).abs() / want;
                                        outcome = Some((slope, rel));
                                        break;
                                    }
                                    Err(e) => last_err = e.to_string(),
                                }
                            }
                            match outcome {
                                Some((slope, rel)) => report.push(
                                    "counting-function-slope",
                                    rel < 0.01,
                                    format!("slope {slope:.6} vs 1/(2 pi), rel dev {rel:.2e}"),
                                ),
                                None => {
                                    report.push("counting-function-slope", false, last_err)
                                }
                            }
                        }
                        Err(e) => report.push("counting-function-slope", false, e.to_string()),
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{named_coupling, CouplingKind};
    use crate::graph::Edge;
    use crate::profile::CoefficientProfile;

    #[test]
    fn verify_passes_on_damped_string() {
        let g = MetricGraph::new(
            vec!["a".into(), "b".into()],
            vec![Edge {
                id: "e".into(),
                tail: 0,
                head: 1,
                length: 1.0,
                damping: CoefficientProfile::constant(1.0, 1.0),
                potential: CoefficientProfile::constant(0.0, 1.0),
            }],
        )
        .unwrap();
        let cs = vec![
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
        ];
        let report = run_all(&g, &cs, &VerifyConfig::default());
        for item in &report.items {
            assert!(
                item.passed,
                "item {} failed: {}",
                item.name, item.detail
            );
        }
    }
}

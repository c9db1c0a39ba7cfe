//! Structural invariants beyond the acceptance criteria: transformation
//! covariance (subdivision, scaling, orientation), WKB consistency at high
//! frequency, determinism across worker counts, and property tests over
//! randomized inputs.

use dwgs_core::coupling::{
    mobius_scale, named_coupling, rescale_to_unit, subdivide_with_couplings, CouplingKind,
    UnitaryCoupling,
};
use dwgs_core::graph::{Edge, MetricGraph};
use dwgs_core::io::load_graph;
use dwgs_core::linalg::{CMat, C64};
use dwgs_core::profile::CoefficientProfile;
use dwgs_core::quad::simpson;
use dwgs_core::rootfinding::{find_roots, ComplexWindow};
use dwgs_core::secular::{
    sample_fundamental_pair, wkb_phase_coefficients, Backend, SecularSystem,
};
use proptest::prelude::*;

const PI: f64 = std::f64::consts::PI;

fn corpus(name: &str) -> dwgs_core::GraphFile {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(format!("{name}.json"));
    load_graph(&path).unwrap()
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

fn const_edge(id: &str, tail: usize, head: usize, len: f64, a: f64) -> Edge {
    Edge {
        id: id.to_string(),
        tail,
        head,
        length: len,
        damping: CoefficientProfile::constant(a, len),
        potential: CoefficientProfile::constant(0.0, len),
    }
}

fn match_roots(a: &[C64], b: &[C64], tol: f64) {
    assert_eq!(a.len(), b.len(), "root counts differ: {a:?} vs {b:?}");
    for ra in a {
        let best = b.iter().map(|rb| (ra - rb).norm()).fold(f64::INFINITY, f64::min);
        assert!(best < tol, "root {ra} unmatched (best {best:.2e})");
    }
}

#[test]
fn subdivision_leaves_spectrum_invariant() {
    let gf = corpus("ex72_loop_pendant");
    let window = ComplexWindow::new(-3.5, 0.5, 2.0 * PI * 6.0 - PI, 2.0 * PI * 6.0 + PI);
    let sys = SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
    let base = find_roots(&sys, &window, 1e-9).unwrap();

    let (sub, sub_couplings, _) = subdivide_with_couplings(&gf.graph, &gf.couplings, 0.5).unwrap();
    assert_eq!(sub.n_edges(), 8);
    let sub_sys = SecularSystem::new(sub, sub_couplings, Backend::Flower).unwrap();
    let subdivided = find_roots(&sub_sys, &window, 1e-9).unwrap();
    match_roots(&base.lambdas(), &subdivided.lambdas(), 1e-6);
}

#[test]
fn scaling_covariance_round_trip() {
    // rescale_to_unit inverts scaled_geometry + Moebius within fp noise
    let gf = corpus("star3_unit");
    let (scaled, scaled_couplings) =
        dwgs_core::coupling::scale_graph(&gf.graph, &gf.couplings, 0.4).unwrap();
    let (unit, unit_couplings, factor) = rescale_to_unit(&scaled, &scaled_couplings).unwrap();
    assert!((factor - 0.4).abs() < 1e-12);
    for (e_orig, e_unit) in gf.graph.edges().iter().zip(unit.edges().iter()) {
        assert!((e_unit.length - 1.0).abs() < 1e-12);
        assert!((e_orig.damping.average() - e_unit.damping.average()).abs() < 1e-10);
    }
    for (c_orig, c_unit) in gf.couplings.iter().zip(unit_couplings.iter()) {
        assert!(c_orig.matrix.sub(&c_unit.matrix).max_abs() < 1e-10);
    }
}

#[test]
fn orientation_flip_leaves_spectrum_invariant() {
    let gf = corpus("ex72_loop_pendant");
    let window = ComplexWindow::new(-3.5, 0.5, 2.0 * PI * 5.0 - PI, 2.0 * PI * 5.0 + PI);
    let sys = SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
    let base = find_roots(&sys, &window, 1e-9).unwrap();
    for flip in 0..gf.graph.n_edges() {
        let flipped = gf.graph.with_flipped_edge(flip);
        let fsys =
            SecularSystem::new(flipped, gf.couplings.clone(), Backend::Flower).unwrap();
        let set = find_roots(&fsys, &window, 1e-9).unwrap();
        match_roots(&base.lambdas(), &set.lambdas(), 1e-8);
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let gf = corpus("ex73_circle_pendants");
    let window = ComplexWindow::new(-6.0, 0.5, 2.0 * PI * 4.0 - PI, 2.0 * PI * 4.0 + PI);
    let sys = SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
    let one = dwgs_core::par::with_workers(1, || find_roots(&sys, &window, 1e-9).unwrap());
    let four = dwgs_core::par::with_workers(4, || find_roots(&sys, &window, 1e-9).unwrap());
    assert_eq!(one.roots.len(), four.roots.len());
    for (a, b) in one.roots.iter().zip(four.roots.iter()) {
        assert_eq!(a.lambda.re.to_bits(), b.lambda.re.to_bits());
        assert_eq!(a.lambda.im.to_bits(), b.lambda.im.to_bits());
        assert_eq!(a.multiplicity, b.multiplicity);
    }
}

#[test]
fn integrator_matches_wkb_asymptotics_at_high_frequency() {
    // u_+(1) = exp(lambda + integral of (phi_0 + phi_1/lambda + phi_2/lambda^2))
    // up to O(lambda^-3); a sign misprint in the phi recursion would show
    // at O(1/lambda)
    let n = 129;
    let vals: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).sin())
        .collect();
    let damping = CoefficientProfile::sampled(vals, 1.0).unwrap();
    let potential = CoefficientProfile::constant(0.3, 1.0);
    let lambda = C64::new(-1.0, 2.0 * PI * 40.0);
    let pair = sample_fundamental_pair(&damping, &potential, lambda, 2, &[1.0]).unwrap();
    let (plus, minus) = (&pair[0].0, &pair[0].1);

    let grid = 129;
    let h = 1.0 / (grid - 1) as f64;
    for (state, sign) in [(plus, 1.0), (minus, -1.0)] {
        let phis = wkb_phase_coefficients(&damping, &potential, 2, sign > 0.0, grid).unwrap();
        let mut phase_integral = C64::new(0.0, 0.0);
        let mut pw = C64::new(1.0, 0.0);
        for phi in &phis {
            phase_integral += simpson(phi, h) / pw;
            pw *= lambda;
        }
        let want_exp = (lambda + phase_integral) * sign;
        let got_ln = C64::new(
            state.ln_scale + state.value.norm().ln(),
            state.value.arg(),
        );
        let mut diff = got_ln - want_exp;
        // compare modulo 2 pi i
        diff.im = (diff.im + PI).rem_euclid(2.0 * PI) - PI;
        assert!(
            diff.norm() < 1e-5,
            "sign {sign}: integrator ln u = {got_ln}, wkb {want_exp}, diff {diff}"
        );
    }
}

#[test]
fn branch_choice_does_not_move_zeros() {
    // the two lambda-tilde branches (principal Re >= 0 and the analytic
    // lambda-following one) differ by per-edge sign flips; the closed-form
    // star secular function must vanish at the same points under either
    use dwgs_core::secular::{lambda_tilde, lambda_tilde_analytic, star_secular_closed_form};
    let lengths = [1.0, 1.0, 1.0];
    let dampings = [3.0, 4.0, 5.0];
    let potentials = [0.0; 3];
    // find a root of the analytic-branch version
    let f = |z: C64| star_secular_closed_form(&lengths, &dampings, &potentials, z);
    let mut z = C64::new(-4.0, 2.0 * PI * 8.0);
    for _ in 0..80 {
        let h = 1e-7 * (1.0 + z.norm());
        let fp = f(z + h);
        let fm = f(z - h);
        let base = fp.ln_mag.max(fm.ln_mag);
        let d = (fp.value_rel(base) - fm.value_rel(base)) / (2.0 * h);
        let step = f(z).value_rel(base) / d;
        z -= step;
        if step.norm() < 1e-13 {
            break;
        }
    }
    // evaluate the principal branch version directly at the root: the
    // per-edge sign flips must leave the zero set unchanged
    let eval_principal = |z: C64| {
        let mut total = dwgs_core::Scaled::ZERO;
        for j in 0..3 {
            let ltj = lambda_tilde(z, dampings[j], potentials[j]);
            let mut term = dwgs_core::Scaled::cexp(ltj)
                .mul_c64((C64::new(1.0, 0.0) + (-ltj * 2.0).exp()) * 0.5)
                .mul_c64(ltj);
            for (i, d) in dampings.iter().enumerate() {
                if i != j {
                    let lti = lambda_tilde(z, *d, potentials[i]);
                    term = term.mul(
                        &dwgs_core::Scaled::cexp(lti)
                            .mul_c64((C64::new(1.0, 0.0) - (-lti * 2.0).exp()) * 0.5),
                    );
                }
            }
            total = total.add(&term);
        }
        total
    };
    let at_root = eval_principal(z);
    let nearby = eval_principal(z + C64::new(0.05, 0.03));
    assert!(
        at_root.ln_ratio(&nearby) < -8.0,
        "principal-branch version does not vanish at the analytic-branch root"
    );
    // sanity: the branches genuinely differ somewhere in this window
    // deep in the left half of the strip lambda + a has negative real part
    // and the principal branch flips sign relative to the analytic one
    let probe = C64::new(-5.5, 2.0 * PI * 8.0);
    let a = lambda_tilde(probe, 5.0, 0.0);
    let b = lambda_tilde_analytic(probe, 5.0, 0.0);
    assert!((a + b).norm() < 1e-9 && (a - b).norm() > 1.0, "expected a sign flip at {probe}");
}

#[test]
fn periodic_window_counts_equal_2n() {
    // equilateral unit graphs: every window Im in (2 pi n - pi, 2 pi n + pi)
    // holds exactly 2N zeros counting multiplicity
    for (name, n2) in [("ex72_loop_pendant", 8usize), ("remark_3star", 6), ("flower2", 4)] {
        let gf = corpus(name);
        let (lo_a, hi_a) = gf.graph.average_damping_bounds();
        let sys =
            SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
        for n in [6u32, 9, 13] {
            let c = 2.0 * PI * n as f64;
            let w = ComplexWindow::new(-hi_a - 1.0, -lo_a.min(0.0) + 1.0, c - PI, c + PI);
            let count = dwgs_core::rootfinding::count_zeros(&sys, &w).unwrap();
            assert_eq!(count, n2, "{name} at n = {n}");
        }
    }
}

#[test]
fn sequence_real_part_decays_like_one_over_n() {
    // |Re lambda_n - c_j| * n stays bounded along a tracked sequence
    let gf = corpus("ex72_loop_pendant");
    let sys = SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
    let pipe = dwgs_core::pipeline::abscissa_pipeline(&gf.graph, &gf.couplings, 1e-6).unwrap();
    // the real quintic root near -0.371
    let seed = pipe
        .report
        .c0_values
        .iter()
        .min_by(|a, b| {
            (a.re + 0.371)
                .abs()
                .partial_cmp(&(b.re + 0.371).abs())
                .unwrap()
        })
        .cloned()
        .unwrap();
    let fit = dwgs_core::rootfinding::track_sequence(&sys, seed, 10..=60, 1e-9).unwrap();
    let scaled: Vec<f64> = fit
        .lambdas
        .iter()
        .map(|(n, l)| (l.re - seed.re).abs() * *n as f64)
        .collect();
    let early = scaled[..10.min(scaled.len())].iter().cloned().fold(0.0, f64::max);
    let late = scaled[scaled.len().saturating_sub(10)..]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    assert!(
        late <= early.max(1e-3) * 4.0,
        "decay bound violated: early {early:.3e}, late {late:.3e}"
    );
}

#[test]
fn eigenfunction_support_structure_on_two_loops() {
    // (i) roots at Re = -2 live on the a1-loop only and vanish at its
    // vertices; (ii) roots at Re = -1.5 are supported on both loops and are
    // symmetric within each
    let gf = corpus("ex71_two_loops");
    let sys = SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
    let window = ComplexWindow::new(-2.5, 0.5, 2.0 * PI * 20.0 - PI, 2.0 * PI * 20.0 + PI);
    let set = find_roots(&sys, &window, 1e-9).unwrap();

    let loop_a: Vec<usize> = (0..3).collect(); // e1, e2, e3 (damping 2)
    let loop_b: Vec<usize> = (3..6).collect(); // e4, e5, e6 (damping 1)
    let mut saw_loop_mode = false;
    let mut saw_symmetric_mode = false;
    for r in &set.roots {
        let ef = dwgs_core::analysis::eigenfunction_at(&sys, r.lambda).unwrap();
        assert!(ef.sigma_min < 1e-6);
        assert!(ef.ode_residual < 1e-6);
        let norm_a: f64 = loop_a.iter().map(|&j| ef.edge_norms_sq[j]).sum();
        let norm_b: f64 = loop_b.iter().map(|&j| ef.edge_norms_sq[j]).sum();
        if (r.lambda.re + 2.0).abs() < 1e-6 {
            assert!(norm_b < 1e-10, "a1-loop mode leaks: {norm_b:.2e}");
            // the lt in 2 pi i Z member of the family is the construction
            // with zeros at every loop vertex (extendable by zero); the
            // other two vanish at the shared vertex only
            let vanishes_everywhere = loop_a.iter().all(|&j| {
                let (u0, _) = ef.bases[j].eval(0.0);
                let (ul, _) = ef.bases[j].eval(1.0);
                u0.norm() < 1e-5 && ul.norm() < 1e-5
            });
            if vanishes_everywhere {
                saw_loop_mode = true;
            }
        }
        if (r.lambda.re + 1.5).abs() < 1e-3 {
            saw_symmetric_mode = true;
            assert!(norm_a > 1e-3 && norm_b > 1e-3, "supported on both loops");
            // symmetric on each loop: |u(x)| = |u(L - x)| along the cycle;
            // with the center at vertex 0, edge e1 mirrors e3 reversed
            let (v1, _) = ef.bases[0].eval(0.25);
            let (v2, _) = ef.bases[2].eval(0.75);
            assert!(
                (v1.norm() - v2.norm()).abs() < 1e-5,
                "loop-A symmetry: {} vs {}",
                v1.norm(),
                v2.norm()
            );
        }
    }
    assert!(saw_loop_mode && saw_symmetric_mode);
}

#[test]
fn derivative_ratio_grows_like_n_squared() {
    let gf = corpus("single_edge");
    let sys = SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
    let lam = |k: f64| C64::new(-1.0, (k * k * PI * PI - 1.0).sqrt());
    let r3 = dwgs_core::analysis::eigenfunction_at(&sys, lam(6.0)).unwrap().derivative_ratio;
    let r12 = dwgs_core::analysis::eigenfunction_at(&sys, lam(24.0)).unwrap().derivative_ratio;
    let growth = r12 / r3;
    assert!(
        (growth - 16.0).abs() < 1.0,
        "expected ~16x growth for 4x frequency, got {growth:.2}"
    );
}

#[test]
fn averaging_crosscheck_api() {
    let gf = corpus("interval_sin");
    let averaged = {
        let mut edges = gf.graph.edges().to_vec();
        for e in edges.iter_mut() {
            e.damping = CoefficientProfile::constant(e.damping.average(), e.length);
        }
        MetricGraph::new(gf.graph.vertex_ids().to_vec(), edges).unwrap()
    };
    let true_sys =
        SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower).unwrap();
    let avg_sys = SecularSystem::new(averaged, gf.couplings.clone(), Backend::Flower).unwrap();
    let rows = dwgs_core::analysis::abscissa_crosscheck(
        &true_sys,
        &avg_sys,
        &[C64::new(-1.0, 0.0)],
        40,
        1e-8,
    )
    .unwrap();
    for row in &rows {
        let dev = (row.fitted_true - row.fitted_averaged).norm();
        assert!(dev < 5e-3, "crosscheck deviation {dev:.2e}");
    }
}

#[test]
fn star_closed_form_matches_subdivided_graph() {
    // zeros of the closed-form star secular function for lengths
    // (1, 1, 1.03) reappear as zeros of both backends on the graph
    // subdivided to the common unit 0.01 (303 edges)
    use dwgs_core::secular::star_secular_closed_form;
    let lengths = [1.0, 1.0, 1.03];
    let dampings = [3.0, 4.0, 5.0];
    let f = |z: C64| star_secular_closed_form(&lengths, &dampings, &[0.0; 3], z);
    let mut z = C64::new(-4.0, 2.0 * PI * 5.0);
    for _ in 0..80 {
        let h = 1e-7 * (1.0 + z.norm());
        let fp = f(z + h);
        let fm = f(z - h);
        let base = fp.ln_mag.max(fm.ln_mag);
        let d = (fp.value_rel(base) - fm.value_rel(base)) / (2.0 * h);
        let step = f(z).value_rel(base) / d;
        z -= step;
        if step.norm() < 1e-12 {
            break;
        }
    }
    let gf = corpus("star3_103");
    let (sub, sub_couplings, _) =
        subdivide_with_couplings(&gf.graph, &gf.couplings, 0.01).unwrap();
    assert_eq!(sub.n_edges(), 303);
    for backend in [Backend::Flower, Backend::Scattering] {
        let sys = SecularSystem::new(sub.clone(), sub_couplings.clone(), backend).unwrap();
        let res = sys.newton_residual(z).unwrap();
        assert!(res < 1e-6, "{backend:?}: residual {res:.2e} at {z}");
    }
}

#[test]
fn wkb_order_zero_profiles() {
    let a = CoefficientProfile::constant(0.0, 1.0);
    let b = CoefficientProfile::constant(0.0, 1.0);
    let phis = wkb_phase_coefficients(&a, &b, 3, true, 65).unwrap();
    for phi in &phis {
        assert!(phi.iter().all(|v| v.abs() < 1e-14));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn piecewise_average_matches_quadrature(
        cuts in proptest::collection::vec(0.05f64..0.95, 1..4),
        values in proptest::collection::vec(-3.0f64..3.0, 5),
    ) {
        let mut breakpoints: Vec<f64> = cuts.clone();
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let vals = values[..breakpoints.len() + 1].to_vec();
        let profile = CoefficientProfile::piecewise(breakpoints, vals, 1.0).unwrap();
        let fine: Vec<f64> = (0..4097).map(|i| profile.eval(i as f64 / 4096.0)).collect();
        let quad = simpson(&fine, 1.0 / 4096.0);
        // the jump panels limit plain Simpson accuracy on discontinuous
        // integrands; the cached average itself is exact
        prop_assert!((profile.average() - quad).abs() < 1e-3);
    }

    #[test]
    fn named_couplings_leading_term_involutive(
        d in 1usize..6,
        alpha in -4.0f64..4.0,
        theta in -3.0f64..3.0,
    ) {
        let kinds = [
            CouplingKind::Standard,
            CouplingKind::Dirichlet,
            CouplingKind::Neumann,
            CouplingKind::Delta(alpha),
            CouplingKind::DeltaPrimeS(alpha),
        ];
        for kind in kinds {
            let c = named_coupling(kind, d).unwrap();
            let s0 = c.scattering_leading_term();
            let sq = s0.matmul(&s0);
            prop_assert!(sq.sub(&CMat::identity(d)).max_abs() < 1e-9);
            let udag_u = s0.dagger().matmul(&s0);
            prop_assert!(udag_u.sub(&CMat::identity(d)).max_abs() < 1e-9);
        }
        let robin = named_coupling(CouplingKind::Robin(theta), 1).unwrap();
        prop_assert!((robin.matrix[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mobius_scaling_preserves_unitarity(
        l0 in 0.1f64..5.0,
        alpha in -3.0f64..3.0,
        d in 1usize..5,
    ) {
        let c = named_coupling(CouplingKind::Delta(alpha), d).unwrap();
        let scaled = mobius_scale(&c.matrix, l0);
        prop_assert!(UnitaryCoupling::custom(scaled).is_ok());
    }

    #[test]
    fn random_two_edge_graphs_have_conjugate_closed_spectra(
        a1 in 0.2f64..2.0,
        a2 in 0.2f64..2.0,
    ) {
        let g = MetricGraph::new(
            names(3),
            vec![const_edge("e1", 0, 1, 1.0, a1), const_edge("e2", 1, 2, 1.0, a2)],
        ).unwrap();
        let cs = vec![
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Standard, 2).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
        ];
        let sys = SecularSystem::new(g, cs, Backend::Flower).unwrap();
        let window = ComplexWindow::new(-2.5, 0.5, -14.0, 14.0);
        let set = find_roots(&sys, &window, 1e-8).unwrap();
        for r in &set.roots {
            if r.lambda.im.abs() < 1e-7 || r.lambda.im.abs() > 12.0 {
                continue;
            }
            let conj = r.lambda.conj();
            let best = set
                .roots
                .iter()
                .map(|q| (q.lambda - conj).norm())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6, "conjugate of {} missing", r.lambda);
        }
    }
}

#[test]
fn rayleigh_identity_on_random_constant_dampings() {
    // 20 certified pairs across deterministic pseudo-random dampings
    let mut seed = 0x1234_5678_9abc_def0u64;
    let mut rnd = || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut checked = 0;
    while checked < 20 {
        let a1 = 0.3 + 1.5 * rnd();
        let a2 = 0.3 + 1.5 * rnd();
        let g = MetricGraph::new(
            names(3),
            vec![const_edge("e1", 0, 1, 1.0, a1), const_edge("e2", 1, 2, 1.0, a2)],
        )
        .unwrap();
        let cs = vec![
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Standard, 2).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
        ];
        let sys = SecularSystem::new(g, cs, Backend::Flower).unwrap();
        let window = ComplexWindow::new(-2.5, 0.5, 2.0 * PI * 3.0 - PI, 2.0 * PI * 3.0 + PI);
        let set = find_roots(&sys, &window, 1e-9).unwrap();
        for r in &set.roots {
            if r.lambda.im.abs() < 1e-6 {
                continue;
            }
            let ef = dwgs_core::analysis::eigenfunction_at(&sys, r.lambda).unwrap();
            let res = dwgs_core::analysis::rayleigh_identity_residual(&sys, &ef).unwrap();
            assert!(res < 1e-6, "rayleigh residual {res:.2e} at {}", r.lambda);
            checked += 1;
        }
    }
}

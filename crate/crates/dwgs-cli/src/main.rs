//! dwgs: spectra and high-frequency abscissas of the damped wave equation
//! on metric graphs.
//!
//! Exit codes: 0 success; 1 verification failures; 2 invalid graph file;
//! 3 solver failure; 4 incommensurate lengths (or subdivision too large)
//! where commensurate lengths are required; 5 polynomial methods disagree.

use clap::{Args, Parser, Subcommand};
use dwgs_core::analysis::{eigenfunction_at, mu_measure, rayleigh_identity_residual};
use dwgs_core::io::load_graph;
use dwgs_core::par::with_workers;
use dwgs_core::pipeline::{abscissa_pipeline, PipelineError};
use dwgs_core::rootfinding::{certify_with_backend, find_roots, ComplexWindow};
use dwgs_core::secular::{Backend, SecularSystem};
use dwgs_core::verify::{run_all, VerifyConfig};
use dwgs_core::GraphFile;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dwgs",
    about = "Damped wave equation on metric graphs: spectra, abscissas, verification",
    long_about = "Solves det-based secular equations for the quadratic pencil \
u'' = (lambda^2 + 2 lambda a(x) - b(x)) u on a metric graph with unitary vertex \
couplings. DWGS_SEED is honoured for stochastic fallbacks; the default paths are \
fully deterministic and ignore it."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Graph definition file (JSON)
    #[arg(long)]
    graph: PathBuf,
    /// Root-refinement tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Secular backend: flower, scattering, or both (both = solve with
    /// flower, certify with scattering)
    #[arg(long, default_value = "both")]
    method: String,
    /// Worker threads (0 = library default)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args, Clone)]
struct WindowArgs {
    #[arg(long, allow_hyphen_values = true)]
    re_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    re_max: f64,
    #[arg(long, allow_hyphen_values = true)]
    im_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    im_max: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Locate eigenvalues in a complex window; CSV columns re, im,
    /// multiplicity, residual, rayleigh_residual
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// High-frequency abscissa report (commensurate lengths only)
    Abscissas {
        #[command(flatten)]
        common: CommonArgs,
        /// Clustering tolerance on Re c0
        #[arg(long, default_value_t = 1e-6)]
        cluster_tol: f64,
        /// Also report a clustering sensitivity sweep
        #[arg(long, default_value_t = false)]
        sweep: bool,
    },
    /// Run the structural-identity verification battery
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Eigenvalue distribution mu_R(I) against the orbit-side prediction
    Mu {
        #[command(flatten)]
        common: CommonArgs,
        /// Interval lower end (on Re lambda)
        #[arg(long, allow_hyphen_values = true)]
        i_min: f64,
        /// Interval upper end
        #[arg(long, allow_hyphen_values = true)]
        i_max: f64,
        /// Cutoffs R as multiples of 2 pi, comma separated
        #[arg(long, default_value = "20,40,60")]
        r_periods: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Spectrum { common, window } => {
            with_workers(common.workers, || cmd_spectrum(&common, &window))
        }
        Command::Abscissas {
            common,
            cluster_tol,
            sweep,
        } => with_workers(common.workers, || cmd_abscissas(&common, cluster_tol, sweep)),
        Command::Verify { common } => with_workers(common.workers, || cmd_verify(&common)),
        Command::Mu {
            common,
            i_min,
            i_max,
            r_periods,
        } => with_workers(common.workers, || cmd_mu(&common, i_min, i_max, &r_periods)),
    }
}

fn load(common: &CommonArgs) -> Result<GraphFile, ExitCode> {
    let gf = match load_graph(&common.graph) {
        Ok(gf) => gf,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(ExitCode::from(2));
        }
    };
    let report = gf.graph.validate();
    if !report.is_valid() {
        for e in &report.errors {
            eprintln!("error: {e}");
        }
        return Err(ExitCode::from(2));
    }
    Ok(gf)
}

fn write_out(common: &CommonArgs, text: &str) -> ExitCode {
    match &common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        None => {
            print!("{text}");
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
    }
}

fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

fn cmd_spectrum(common: &CommonArgs, window: &WindowArgs) -> ExitCode {
    let gf = match load(common) {
        Ok(gf) => gf,
        Err(code) => return code,
    };
    let primary_backend = match common.method.as_str() {
        "scattering" => Backend::Scattering,
        "flower" | "both" => Backend::Flower,
        other => {
            eprintln!("error: unknown --method `{other}` (expected flower, scattering, or both)");
            return ExitCode::from(2);
        }
    };
    if !(window.re_min < window.re_max && window.im_min < window.im_max) {
        eprintln!("error: empty window");
        return ExitCode::from(2);
    }
    let system = match SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), primary_backend)
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let w = ComplexWindow::new(window.re_min, window.re_max, window.im_min, window.im_max);
    let mut set = match find_roots(&system, &w, common.tol) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    if common.method == "both" {
        let other = system.with_backend(match primary_backend {
            Backend::Flower => Backend::Scattering,
            Backend::Scattering => Backend::Flower,
        });
        if let Err(e) = certify_with_backend(&mut set, &other) {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let mut rows = Vec::new();
    for r in &set.roots {
        let rayleigh = if r.lambda.im.abs() > 1e-6 {
            eigenfunction_at(&system, r.lambda)
                .ok()
                .and_then(|ef| rayleigh_identity_residual(&system, &ef).ok())
        } else {
            None
        };
        rows.push((r, rayleigh));
    }
    let (lo_a, hi_a) = gf.graph.average_damping_bounds();
    let abscissas: Vec<(f64, usize)> = abscissa_pipeline(&gf.graph, &gf.couplings, 1e-6)
        .map(|p| p.original_scale_clusters())
        .unwrap_or_default();

    let mut bound_violations = 0usize;
    for (r, _) in &rows {
        if r.lambda.im.abs() > 1e-6 && (r.lambda.re < -hi_a - 1e-9 || r.lambda.re > -lo_a + 1e-9)
        {
            bound_violations += 1;
        }
    }

    let text = if common.format == "json" {
        let mut entries = Vec::new();
        for (r, rayleigh) in &rows {
            entries.push(serde_json::json!({
                "re": r.lambda.re,
                "im": r.lambda.im,
                "multiplicity": r.multiplicity,
                "residual": r.residual,
                "backend_residual": r.backend_residual,
                "rayleigh_residual": rayleigh,
            }));
        }
        let summary = serde_json::json!({
            "count": set.total_multiplicity,
            "window": {"re_min": set.window.re_min, "re_max": set.window.re_max,
                        "im_min": set.window.im_min, "im_max": set.window.im_max},
            "bound": {"re_low": -hi_a, "re_high": -lo_a, "violations": bound_violations},
            "abscissas": abscissas.iter().map(|(c, m)| serde_json::json!({"c": c, "m": m})).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(
            &serde_json::json!({"eigenvalues": entries, "summary": summary}),
        )
        .unwrap()
            + "\n"
    } else {
        let mut s = String::from("re,im,multiplicity,residual,rayleigh_residual\n");
        for (r, rayleigh) in &rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt12(r.lambda.re),
                fmt12(r.lambda.im),
                r.multiplicity,
                fmt12(r.residual),
                rayleigh.map(fmt12).unwrap_or_default(),
            ));
        }
        s
    };
    let code = write_out(common, &text);
    let nearest = |re: f64| -> String {
        abscissas
            .iter()
            .min_by(|a, b| (a.0 - re).abs().partial_cmp(&(b.0 - re).abs()).unwrap())
            .map(|(c, _)| format!("{c:.6}"))
            .unwrap_or_else(|| "-".into())
    };
    eprintln!(
        "spectrum: {} eigenvalues (multiplicity {}), bound [{:.4}, {:.4}], {} bound violations",
        set.roots.len(),
        set.total_multiplicity,
        -hi_a,
        -lo_a,
        bound_violations
    );
    for (r, _) in rows.iter().take(8) {
        eprintln!(
            "  {:+.6}{:+.6}i -> abscissa {}",
            r.lambda.re,
            r.lambda.im,
            nearest(r.lambda.re)
        );
    }
    code
}

fn cmd_abscissas(common: &CommonArgs, cluster_tol: f64, sweep: bool) -> ExitCode {
    let gf = match load(common) {
        Ok(gf) => gf,
        Err(code) => return code,
    };
    let pipe = match abscissa_pipeline(&gf.graph, &gf.couplings, cluster_tol) {
        Ok(p) => p,
        Err(e @ PipelineError::Incommensurate) | Err(e @ PipelineError::TooManySubEdges(_, _)) => {
            eprintln!("error: {e}; use `dwgs spectrum` for the numeric spectrum");
            return ExitCode::from(4);
        }
        Err(PipelineError::MethodDisagreement(dev)) => {
            eprintln!("error: orbit and characteristic polynomials disagree ({dev:.3e})");
            return ExitCode::from(5);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let poly = &pipe.characteristic;
    let mut obj = serde_json::json!({
        "l0": pipe.reduction.l0,
        "n_directed": poly.n_directed,
        "radius": poly.radius,
        "polynomial": {
            "provenance": "characteristic",
            "variable": "t = y / radius, y = exp(c0)",
            "coefficients": poly.poly.coeffs.iter().map(|c| vec![c.re, c.im]).collect::<Vec<_>>(),
        },
        "orbit_method_ran": pipe.orbit.is_some(),
        "orbit_polynomial": pipe.orbit.as_ref().map(|p| {
            p.poly.coeffs.iter().map(|c| vec![c.re, c.im]).collect::<Vec<_>>()
        }),
        "method_deviation": pipe.method_deviation,
        "roots_y": pipe.report.roots_y.iter().map(|c| vec![c.re, c.im]).collect::<Vec<_>>(),
        "c0_unit": pipe.report.c0_values.iter().map(|c| vec![c.re, c.im]).collect::<Vec<_>>(),
        "clusters": pipe.report.clusters.iter().map(|cl| serde_json::json!({
            "c_unit": cl.c,
            "c_original": cl.c / pipe.reduction.l0,
            "m": cl.multiplicity,
            "mu": format!("{}/{}", cl.mu.0, cl.mu.1),
        })).collect::<Vec<_>>(),
    });
    if sweep {
        let mut rows = Vec::new();
        for tol in [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
            if let Ok(rep) = dwgs_core::orbits::abscissa_report(poly, tol) {
                rows.push(serde_json::json!({"tol": tol, "clusters": rep.clusters.len()}));
            }
        }
        obj["cluster_sensitivity"] = serde_json::Value::Array(rows);
    }
    let text = serde_json::to_string_pretty(&obj).unwrap() + "\n";
    let code = write_out(common, &text);
    eprintln!(
        "abscissas: {} clusters over 2N = {} (l0 = {}), method deviation {:?}",
        pipe.report.clusters.len(),
        poly.n_directed,
        pipe.reduction.l0,
        pipe.method_deviation
    );
    code
}

fn cmd_verify(common: &CommonArgs) -> ExitCode {
    let gf = match load(common) {
        Ok(gf) => gf,
        Err(code) => return code,
    };
    let report = run_all(&gf.graph, &gf.couplings, &VerifyConfig::default());
    let text = if common.format == "json" {
        let items: Vec<_> = report
            .items
            .iter()
            .map(|item| {
                serde_json::json!({
                    "name": item.name,
                    "passed": item.passed,
                    "skipped": item.skipped,
                    "detail": item.detail,
                })
            })
            .collect();
        serde_json::to_string_pretty(
            &serde_json::json!({"items": items, "all_passed": report.all_passed()}),
        )
        .unwrap()
            + "\n"
    } else {
        let mut text = String::new();
        for item in &report.items {
            let status = if item.skipped {
                "SKIP"
            } else if item.passed {
                "PASS"
            } else {
                "FAIL"
            };
            text.push_str(&format!("{status} {}: {}\n", item.name, item.detail));
        }
        text
    };
    let code = write_out(common, &text);
    if !report.all_passed() {
        return ExitCode::from(1);
    }
    code
}

fn cmd_mu(common: &CommonArgs, i_min: f64, i_max: f64, r_periods: &str) -> ExitCode {
    let gf = match load(common) {
        Ok(gf) => gf,
        Err(code) => return code,
    };
    let periods: Vec<f64> = r_periods
        .split(',')
        .filter_map(|s| s.trim().parse::<f64>().ok())
        .collect();
    if periods.is_empty() {
        eprintln!("error: empty --r-periods");
        return ExitCode::from(2);
    }
    let pi = std::f64::consts::PI;
    let system = match SecularSystem::new(gf.graph.clone(), gf.couplings.clone(), Backend::Flower)
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let (lo_a, hi_a) = gf.graph.average_damping_bounds();
    let r_max = periods.iter().cloned().fold(0.0, f64::max) * 2.0 * pi;
    let w = ComplexWindow::new(-hi_a - 1.0, -lo_a.min(0.0) + 1.0, -r_max - 0.5, r_max + 0.5);
    let set = match find_roots(&system, &w, common.tol) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let eigs: Vec<(dwgs_core::C64, usize)> = set
        .roots
        .iter()
        .map(|r| (r.lambda, r.multiplicity))
        .collect();
    // orbit-side prediction of mu(I) = m_I / 2N
    let prediction = abscissa_pipeline(&gf.graph, &gf.couplings, 1e-6).ok().map(|p| {
        let n2 = 2 * p.reduction.graph.n_edges();
        let m: usize = p
            .original_scale_clusters()
            .iter()
            .filter(|(c, _)| *c > i_min && *c < i_max)
            .map(|(_, m)| m)
            .sum();
        (m, n2)
    });
    let mut text = format!("mu_R(({i_min}, {i_max}))\n");
    let mut table = Vec::new();
    for &p in &periods {
        let r = 2.0 * pi * p;
        match mu_measure(&eigs, (i_min, i_max), r, None) {
            Ok(mu) => {
                let (num, den) = (mu.numerator, mu.denominator);
                let (rn, rd) = mu.reduced();
                text.push_str(&format!(
                    "R = 2 pi * {p}: {num}/{den} = {rn}/{rd} = {:.6}\n",
                    mu.value()
                ));
                table.push(serde_json::json!({
                    "r_periods": p, "num": num, "den": den, "value": mu.value()
                }));
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
        }
    }
    match prediction {
        Some((m, n2)) => text.push_str(&format!("orbit prediction m_I/2N = {m}/{n2}\n")),
        None => text.push_str("orbit prediction unavailable (incommensurate)\n"),
    }
    if common.format == "json" {
        let obj = serde_json::json!({
            "interval": [i_min, i_max],
            "table": table,
            "prediction": prediction.map(|(m, n2)| format!("{m}/{n2}")),
        });
        return write_out(common, &(serde_json::to_string_pretty(&obj).unwrap() + "\n"));
    }
    write_out(common, &text)
}

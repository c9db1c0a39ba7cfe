//! Complex polynomials: evaluation, companion-matrix roots, root clustering.

use crate::linalg::{hessenberg_eigenvalues, CMat, C64};

#[derive(Debug, Clone)]
pub struct CPoly {
    /// `coeffs[k]` multiplies `y^k`.
    pub coeffs: Vec<C64>,
}

impl CPoly {
    pub fn new(coeffs: Vec<C64>) -> CPoly {
        CPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        let mut d = self.coeffs.len();
        while d > 1 && self.coeffs[d - 1] == C64::new(0.0, 0.0) {
            d -= 1;
        }
        d - 1
    }

    pub fn eval(&self, y: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * y + c;
        }
        acc
    }

    pub fn derivative(&self) -> CPoly {
        if self.coeffs.len() <= 1 {
            return CPoly::new(vec![C64::new(0.0, 0.0)]);
        }
        CPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Zero out coefficients below `rel_tol * max|coeff|`.
    pub fn cleaned(&self, rel_tol: f64) -> CPoly {
        let thr = rel_tol * self.max_coeff();
        CPoly::new(
            self.coeffs
                .iter()
                .map(|&c| {
                    if c.norm() < thr {
                        C64::new(0.0, 0.0)
                    } else {
                        c
                    }
                })
                .collect(),
        )
    }

    /// All roots, multiplicity-with-repetition, via the companion matrix of
    /// the monic normalization followed by Newton polishing.
    pub fn roots(&self) -> Vec<C64> {
        let deg = self.degree();
        if deg == 0 {
            return Vec::new();
        }
        let lead = self.coeffs[deg];
        assert!(lead.norm() > 0.0);
        let monic: Vec<C64> = (0..deg).map(|k| self.coeffs[k] / lead).collect();
        let mut comp = CMat::zeros(deg, deg);
        for i in 1..deg {
            comp[(i, i - 1)] = C64::new(1.0, 0.0);
        }
        for i in 0..deg {
            comp[(i, deg - 1)] = -monic[i];
        }
        let mut roots = hessenberg_eigenvalues(comp);
        let dp = self.derivative();
        for r in roots.iter_mut() {
            let mut z = *r;
            for _ in 0..4 {
                let f = self.eval(z);
                let df = dp.eval(z);
                if df.norm() == 0.0 {
                    break;
                }
                let step = f / df;
                if !step.re.is_finite() || !step.im.is_finite() {
                    break;
                }
                // a multiple root makes plain Newton creep; accept small steps only
                if step.norm() > 0.5 * (1.0 + z.norm()) {
                    break;
                }
                z -= step;
            }
            if self.eval(z).norm() <= self.eval(*r).norm() {
                *r = z;
            }
        }
        roots.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        roots
    }
}

/// Greedy 1-d clustering of values within `tol` of a running cluster mean.
/// Input gets sorted; returns (center, count) pairs sorted ascending.
pub fn cluster_reals(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, usize)> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some((c, k)) if (x - *c).abs() <= tol => {
                *c = (*c * (*k as f64) + x) / (*k as f64 + 1.0);
                *k += 1;
            }
            _ => out.push((x, 1)),
        }
    }
    out
}

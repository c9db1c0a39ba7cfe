//! Per-edge coefficient profiles (damping a_j, potential b_j) with cached
//! edge averages.

use crate::quad::{derivative4, Spline};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("sampled profile needs at least 4 points, got {0}")]
    TooFewSamples(usize),
    #[error("piecewise profile: breakpoints must be strictly increasing inside (0, length)")]
    BadBreakpoints,
    #[error("piecewise profile: {values} values need {expected} (breakpoints + 1)")]
    SegmentMismatch { values: usize, expected: usize },
    #[error("profile value not finite")]
    NotFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Constant(f64),
    Piecewise {
        /// interior breakpoints, strictly increasing in (0, len)
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Sampled(Spline),
}

/// A bounded coefficient on `[0, length]` of the owning edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    kind: Kind,
    length: f64,
    average: f64,
}

impl CoefficientProfile {
    pub fn constant(v: f64, length: f64) -> CoefficientProfile {
        CoefficientProfile {
            kind: Kind::Constant(v),
            length,
            average: v,
        }
    }

    pub fn piecewise(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        length: f64,
    ) -> Result<CoefficientProfile, ProfileError> {
        if values.len() != breakpoints.len() + 1 {
            return Err(ProfileError::SegmentMismatch {
                values: values.len(),
                expected: breakpoints.len() + 1,
            });
        }
        let mut prev = 0.0;
        for &b in &breakpoints {
            if !(b > prev && b < length) {
                return Err(ProfileError::BadBreakpoints);
            }
            prev = b;
        }
        if values.iter().chain(breakpoints.iter()).any(|v| !v.is_finite()) {
            return Err(ProfileError::NotFinite);
        }
        let mut avg = 0.0;
        let mut left = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let right = if i < breakpoints.len() {
                breakpoints[i]
            } else {
                length
            };
            avg += v * (right - left);
            left = right;
        }
        avg /= length;
        Ok(CoefficientProfile {
            kind: Kind::Piecewise {
                breakpoints,
                values,
            },
            length,
            average: avg,
        })
    }

    pub fn sampled(values: Vec<f64>, length: f64) -> Result<CoefficientProfile, ProfileError> {
        if values.len() < 4 {
            return Err(ProfileError::TooFewSamples(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProfileError::NotFinite);
        }
        let spline = Spline::new(values, length);
        let average = spline.integral() / length;
        Ok(CoefficientProfile {
            kind: Kind::Sampled(spline),
            length,
            average,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Constant(v) => *v,
            Kind::Piecewise {
                breakpoints,
                values,
            } => {
                let mut i = 0;
                while i < breakpoints.len() && x >= breakpoints[i] {
                    i += 1;
                }
                values[i]
            }
            Kind::Sampled(sp) => sp.eval(x),
        }
    }

    pub fn average(&self) -> f64 {
        self.average
    }

    /// Pointwise range (min, max) of the profile over the edge.
    pub fn value_range(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Constant(v) => (*v, *v),
            Kind::Piecewise { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
            Kind::Sampled(sp) => {
                let n = 8 * sp.values.len();
                (0..=n)
                    .map(|i| sp.eval(self.length * i as f64 / n as f64))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            }
        }
    }

    /// Constant segments (x0, x1, value) when the profile is piecewise
    /// constant (a single segment for Constant).
    pub fn constant_segments(&self) -> Option<Vec<(f64, f64, f64)>> {
        match &self.kind {
            Kind::Constant(v) => Some(vec![(0.0, self.length, *v)]),
            Kind::Piecewise {
                breakpoints,
                values,
            } => {
                let mut out = Vec::with_capacity(values.len());
                let mut left = 0.0;
                for (i, &v) in values.iter().enumerate() {
                    let right = if i < breakpoints.len() {
                        breakpoints[i]
                    } else {
                        self.length
                    };
                    out.push((left, right, v));
                    left = right;
                }
                Some(out)
            }
            Kind::Sampled(_) => None,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Constant(_))
    }

    /// Values on a uniform grid of `n` points spanning `[0, length]`.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        let h = self.length / (n - 1) as f64;
        (0..n).map(|i| self.eval(i as f64 * h)).collect()
    }

    /// d/dx of the profile on a uniform grid (4th-order differences on the
    /// sampled values; exactly zero for constant and piecewise-constant
    /// interiors, where the derivative is taken segment-wise).
    pub fn derivative_grid(&self, n: usize) -> Vec<f64> {
        match &self.kind {
            Kind::Constant(_) | Kind::Piecewise { .. } => vec![0.0; n],
            Kind::Sampled(_) => {
                let vals = self.sample_grid(n.max(5));
                let h = self.length / (vals.len() - 1) as f64;
                let d = derivative4(&vals, h);
                d[..n.min(d.len())].to_vec()
            }
        }
    }

    /// Restriction to `[x0, x1]` as a profile on an edge of length `x1 - x0`.
    pub fn restrict(&self, x0: f64, x1: f64) -> CoefficientProfile {
        let sub = x1 - x0;
        match &self.kind {
            Kind::Constant(v) => CoefficientProfile::constant(*v, sub),
            Kind::Piecewise {
                breakpoints,
                values,
            } => {
                let mut bps = Vec::new();
                let mut vals = Vec::new();
                let mut left = 0.0f64;
                for (i, &v) in values.iter().enumerate() {
                    let right = if i < breakpoints.len() {
                        breakpoints[i]
                    } else {
                        self.length
                    };
                    if right <= x0 + 1e-14 || left >= x1 - 1e-14 {
                        left = right;
                        continue;
                    }
                    if !vals.is_empty() {
                        bps.push(left - x0);
                    }
                    vals.push(v);
                    left = right;
                }
                if vals.is_empty() {
                    vals.push(self.eval(0.5 * (x0 + x1)));
                }
                if vals.len() == 1 {
                    CoefficientProfile::constant(vals[0], sub)
                } else {
                    CoefficientProfile::piecewise(bps, vals, sub)
                        .expect("restriction of a valid piecewise profile is valid")
                }
            }
            Kind::Sampled(sp) => {
                let density = (sp.values.len() - 1) as f64 / self.length;
                let n = ((sub * density).ceil() as usize + 1).max(4);
                let vals = (0..n)
                    .map(|i| sp.eval(x0 + sub * i as f64 / (n - 1) as f64))
                    .collect();
                CoefficientProfile::sampled(vals, sub)
                    .expect("restriction keeps at least 4 samples")
            }
        }
    }

    /// The profile traversed in the opposite direction, x -> length - x.
    pub fn reversed(&self) -> CoefficientProfile {
        match &self.kind {
            Kind::Constant(v) => CoefficientProfile::constant(*v, self.length),
            Kind::Piecewise {
                breakpoints,
                values,
            } => {
                let bps = breakpoints
                    .iter()
                    .rev()
                    .map(|b| self.length - b)
                    .collect::<Vec<_>>();
                let vals = values.iter().rev().cloned().collect::<Vec<_>>();
                CoefficientProfile::piecewise(bps, vals, self.length)
                    .expect("reversal of a valid piecewise profile is valid")
            }
            Kind::Sampled(sp) => {
                let vals = sp.values.iter().rev().cloned().collect::<Vec<_>>();
                CoefficientProfile::sampled(vals, self.length)
                    .expect("reversal of a valid sampled profile is valid")
            }
        }
    }

    /// Profile scaled for the graph scaling lemma: values divided by `factor`
    /// on an edge whose length becomes `length * factor`.
    pub fn scaled(&self, factor: f64, power: i32) -> CoefficientProfile {
        let s = factor.powi(power).recip();
        let new_len = self.length * factor;
        match &self.kind {
            Kind::Constant(v) => CoefficientProfile::constant(v * s, new_len),
            Kind::Piecewise {
                breakpoints,
                values,
            } => CoefficientProfile::piecewise(
                breakpoints.iter().map(|b| b * factor).collect(),
                values.iter().map(|v| v * s).collect(),
                new_len,
            )
            .expect("scaling preserves validity"),
            Kind::Sampled(sp) => CoefficientProfile::sampled(
                sp.values.iter().map(|v| v * s).collect(),
                new_len,
            )
            .expect("scaling preserves validity"),
        }
    }
}

/// Wire format for profiles in graph definition files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileSpec {
    Constant { value: f64 },
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Sampled { values: Vec<f64> },
}

impl ProfileSpec {
    pub fn build(&self, length: f64) -> Result<CoefficientProfile, ProfileError> {
        match self {
            ProfileSpec::Constant { value } => Ok(CoefficientProfile::constant(*value, length)),
            ProfileSpec::Piecewise {
                breakpoints,
                values,
            } => CoefficientProfile::piecewise(breakpoints.clone(), values.clone(), length),
            ProfileSpec::Sampled { values } => CoefficientProfile::sampled(values.clone(), length),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;

    #[test]
    fn constant_and_piecewise_averages_exact() {
        let p = CoefficientProfile::constant(2.0, 1.0);
        assert_eq!(p.average(), 2.0);
        let pw = CoefficientProfile::piecewise(vec![0.5], vec![0.0, 2.0], 1.0).unwrap();
        assert!((pw.average() - 1.0).abs() < 1e-15);
        assert_eq!(pw.eval(0.25), 0.0);
        assert_eq!(pw.eval(0.75), 2.0);
    }

    #[test]
    fn sampled_sin_average_matches_analytic() {
        let n = 257;
        let vals: Vec<f64> = (0..n)
            .map(|i| (std::f64::consts::PI * i as f64 / (n - 1) as f64).sin())
            .collect();
        let p = CoefficientProfile::sampled(vals, 1.0).unwrap();
        assert!(
            (p.average() - 2.0 / std::f64::consts::PI).abs() < 1e-8,
            "avg = {}",
            p.average()
        );
        // cached average agrees with independent composite Simpson of the
        // interpolant on a fine grid
        let fine: Vec<f64> = (0..2049).map(|i| p.eval(i as f64 / 2048.0)).collect();
        let q = simpson(&fine, 1.0 / 2048.0);
        assert!((p.average() - q).abs() < 1e-8);
    }

    #[test]
    fn restriction_and_reversal() {
        let pw =
            CoefficientProfile::piecewise(vec![1.0, 2.0], vec![1.0, 2.0, 3.0], 3.0).unwrap();
        let r = pw.restrict(1.0, 2.0);
        assert!((r.average() - 2.0).abs() < 1e-14);
        let rev = pw.reversed();
        assert_eq!(rev.eval(0.5), 3.0);
        assert_eq!(rev.eval(2.5), 1.0);
        assert!((rev.average() - pw.average()).abs() < 1e-14);

        let n = 65;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 / (n - 1) as f64).powi(2)).collect();
        let sp = CoefficientProfile::sampled(vals, 1.0).unwrap();
        let mid = sp.restrict(0.25, 0.75);
        assert!((mid.eval(0.25) - 0.25).abs() < 1e-4);
        assert!((mid.average() - (0.75f64.powi(3) - 0.25f64.powi(3)) / (3.0 * 0.5)).abs() < 1e-4);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(matches!(
            CoefficientProfile::sampled(vec![1.0, 2.0, 3.0], 1.0),
            Err(ProfileError::TooFewSamples(3))
        ));
    }

    #[test]
    fn derivative_grid_piecewise_is_zero() {
        let pw = CoefficientProfile::piecewise(vec![0.5], vec![0.0, 2.0], 1.0).unwrap();
        assert!(pw.derivative_grid(9).iter().all(|&d| d == 0.0));
    }
}

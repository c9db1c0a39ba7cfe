//! Quadrature and grid utilities: composite Simpson, natural cubic splines,
//! 4th-order finite differences.

/// Composite Simpson on a uniform grid of `v.len()` points with spacing `h`.
/// Even interval counts use plain Simpson; an odd count gets a 3/8 tail.
pub fn simpson(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    assert!(n >= 2);
    if n == 2 {
        return 0.5 * h * (v[0] + v[1]);
    }
    let intervals = n - 1;
    let (simpson_end, mut total) = if intervals % 2 == 0 {
        (n - 1, 0.0)
    } else {
        // 3/8 rule on the last three intervals
        let k = n - 4;
        let tail = 3.0 * h / 8.0 * (v[k] + 3.0 * v[k + 1] + 3.0 * v[k + 2] + v[k + 3]);
        (k, tail)
    };
    if simpson_end >= 2 {
        let mut s = v[0] + v[simpson_end];
        let mut i = 1;
        while i < simpson_end {
            s += 4.0 * v[i];
            if i + 1 < simpson_end {
                s += 2.0 * v[i + 1];
            }
            i += 2;
        }
        total += s * h / 3.0;
    }
    total
}

/// First derivative on a uniform grid, 4th order (5-point stencils).
pub fn derivative4(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    assert!(n >= 5, "need at least 5 points for 4th-order differences");
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h);
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h);
    for i in 2..n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
    }
    d[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5])
        / (12.0 * h);
    d[n - 1] = (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4]
        + 3.0 * v[n - 5])
        / (12.0 * h);
    d
}

/// Natural cubic spline through `values` placed uniformly on `[0, len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    pub values: Vec<f64>,
    second: Vec<f64>,
    pub len: f64,
}

impl Spline {
    pub fn new(values: Vec<f64>, len: f64) -> Spline {
        let n = values.len();
        assert!(n >= 2 && len > 0.0);
        let h = len / (n - 1) as f64;
        // tridiagonal system for second derivatives, natural BCs
        let mut second = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut diag = vec![4.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                rhs[i] = 6.0 / (h * h) * (values[i] - 2.0 * values[i + 1] + values[i + 2]);
            }
            for i in 1..m {
                let f = 1.0 / diag[i - 1];
                diag[i] -= f;
                rhs[i] -= f * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - second[i + 2]) / diag[i];
            }
        }
        Spline {
            values,
            second,
            len,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = self.len / (n - 1) as f64;
        let xc = x.clamp(0.0, self.len);
        let mut i = (xc / h).floor() as usize;
        if i >= n - 1 {
            i = n - 2;
        }
        let t = xc - i as f64 * h;
        let a = (self.values[i + 1] - self.values[i]) / h
            - h / 6.0 * (2.0 * self.second[i] + self.second[i + 1]);
        self.values[i]
            + a * t
            + 0.5 * self.second[i] * t * t
            + (self.second[i + 1] - self.second[i]) / (6.0 * h) * t * t * t
    }

    /// Exact integral of the piecewise-cubic interpolant over `[0, len]`.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        let h = self.len / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n - 1 {
            total += 0.5 * h * (self.values[i] + self.values[i + 1])
                - h * h * h / 24.0 * (self.second[i] + self.second[i + 1]);
        }
        total
    }
}

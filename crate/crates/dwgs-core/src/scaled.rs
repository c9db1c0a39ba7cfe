//! Log-scaled complex arithmetic.
//!
//! Secular determinants on graphs with many edges overflow f64 long before
//! the zeros of interest stop being meaningful, so determinant-like values
//! are carried as `phase * exp(ln_mag)` with `|phase| = 1`.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    /// Natural log of the magnitude; `f64::NEG_INFINITY` for an exact zero.
    pub ln_mag: f64,
    /// Unit-modulus phase factor (zero when the value is zero).
    pub phase: Complex64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        ln_mag: f64::NEG_INFINITY,
        phase: Complex64::new(0.0, 0.0),
    };

    pub const ONE: Scaled = Scaled {
        ln_mag: 0.0,
        phase: Complex64::new(1.0, 0.0),
    };

    pub fn from_c64(z: Complex64) -> Scaled {
        let m = z.norm();
        if m == 0.0 || !m.is_finite() {
            if m == 0.0 {
                return Scaled::ZERO;
            }
            // Renormalize component-wise to survive z with huge parts.
            let s = z.re.abs().max(z.im.abs());
            let zn = Complex64::new(z.re / s, z.im / s);
            let mn = zn.norm();
            return Scaled {
                ln_mag: s.ln() + mn.ln(),
                phase: zn / mn,
            };
        }
        Scaled {
            ln_mag: m.ln(),
            phase: z / m,
        }
    }

    /// `exp(w)` for complex `w`, without overflow.
    pub fn cexp(w: Complex64) -> Scaled {
        Scaled {
            ln_mag: w.re,
            phase: Complex64::from_polar(1.0, w.im),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_mag == f64::NEG_INFINITY
    }

    pub fn mul(&self, rhs: &Scaled) -> Scaled {
        if self.is_zero() || rhs.is_zero() {
            return Scaled::ZERO;
        }
        Scaled {
            ln_mag: self.ln_mag + rhs.ln_mag,
            phase: self.phase * rhs.phase,
        }
    }

    pub fn mul_c64(&self, rhs: Complex64) -> Scaled {
        self.mul(&Scaled::from_c64(rhs))
    }

    pub fn div(&self, rhs: &Scaled) -> Scaled {
        assert!(!rhs.is_zero(), "division of scaled value by zero");
        if self.is_zero() {
            return Scaled::ZERO;
        }
        Scaled {
            ln_mag: self.ln_mag - rhs.ln_mag,
            phase: self.phase / rhs.phase,
        }
    }

    pub fn neg(&self) -> Scaled {
        Scaled {
            ln_mag: self.ln_mag,
            phase: -self.phase,
        }
    }

    pub fn conj(&self) -> Scaled {
        Scaled {
            ln_mag: self.ln_mag,
            phase: self.phase.conj(),
        }
    }

    /// Sum with exponent realignment; terms more than ~745 e-folds below the
    /// dominant one are absorbed into it.
    pub fn add(&self, rhs: &Scaled) -> Scaled {
        if self.is_zero() {
            return *rhs;
        }
        if rhs.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.ln_mag >= rhs.ln_mag {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = lo.ln_mag - hi.ln_mag;
        if d < -745.0 {
            return *hi;
        }
        Scaled::from_c64(hi.phase + lo.phase * d.exp()).shift(hi.ln_mag)
    }

    /// Multiply by `exp(delta)`.
    pub fn shift(&self, delta: f64) -> Scaled {
        if self.is_zero() {
            return Scaled::ZERO;
        }
        Scaled {
            ln_mag: self.ln_mag + delta,
            phase: self.phase,
        }
    }

    /// The plain complex value `phase * exp(ln_mag - exponent)`.
    pub fn value_rel(&self, exponent: f64) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.phase * (self.ln_mag - exponent).exp()
    }

    pub fn to_c64(&self) -> Complex64 {
        self.value_rel(0.0)
    }

    /// ln of the magnitude ratio |self| / |rhs|.
    pub fn ln_ratio(&self, rhs: &Scaled) -> f64 {
        self.ln_mag - rhs.ln_mag
    }
}

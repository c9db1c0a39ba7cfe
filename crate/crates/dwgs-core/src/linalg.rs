//! Small dense complex linear algebra.
//!
//! Everything in the solver is a matrix of side at most a few hundred
//! (2N slots for N graph edges), so plain O(n^3) kernels with partial
//! pivoting are entirely adequate. Determinants are returned in scaled
//! form because entries like e^{lambda l} make the raw product overflow
//! on subdivided graphs.

use crate::scaled::Scaled;
use num_complex::Complex64;

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub m: usize,
    pub a: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize, m: usize) -> CMat {
        CMat {
            n,
            m,
            a: vec![C64::new(0.0, 0.0); n * m],
        }
    }

    pub fn identity(n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> CMat {
        let n = rows.len();
        let m = if n == 0 { 0 } else { rows[0].len() };
        let mut out = CMat::zeros(n, m);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), m);
            for (j, &v) in r.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.m, rhs.n);
        let mut out = CMat::zeros(self.n, rhs.m);
        for i in 0..self.n {
            for k in 0..self.m {
                let aik = self[(i, k)];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.m {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.m, x.len());
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..self.m {
                s += self[(i, j)] * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMat {
        let mut out = CMat::zeros(self.m, self.n);
        for i in 0..self.n {
            for j in 0..self.m {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.n, self.m), (rhs.n, rhs.m));
        let mut out = self.clone();
        for (x, y) in out.a.iter_mut().zip(rhs.a.iter()) {
            *x += y;
        }
        out
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.n, self.m), (rhs.n, rhs.m));
        let mut out = self.clone();
        for (x, y) in out.a.iter_mut().zip(rhs.a.iter()) {
            *x -= y;
        }
        out
    }

    pub fn scale(&self, c: C64) -> CMat {
        let mut out = self.clone();
        for x in out.a.iter_mut() {
            *x *= c;
        }
        out
    }

    /// max |a_ij|
    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.a[i * self.m + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.a[i * self.m + j]
    }
}

/// LU factorization with partial pivoting, kept for repeated solves.
pub struct Lu {
    lu: CMat,
    piv: Vec<usize>,
    sign_flips: usize,
}

pub fn lu_factor(mut a: CMat) -> Lu {
    assert_eq!(a.n, a.m);
    let n = a.n;
    let mut piv = Vec::with_capacity(n);
    let mut flips = 0;
    for k in 0..n {
        let mut p = k;
        let mut best = a[(k, k)].norm();
        for i in k + 1..n {
            let v = a[(i, k)].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            flips += 1;
        }
        piv.push(p);
        let pivot = a[(k, k)];
        if pivot.norm() == 0.0 {
            continue;
        }
        for i in k + 1..n {
            let f = a[(i, k)] / pivot;
            a[(i, k)] = f;
            if f != C64::new(0.0, 0.0) {
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
    }
    Lu {
        lu: a,
        piv,
        sign_flips: flips,
    }
}

impl Lu {
    pub fn det_scaled(&self) -> Scaled {
        let n = self.lu.n;
        let mut d = if self.sign_flips % 2 == 0 {
            Scaled::ONE
        } else {
            Scaled::ONE.neg()
        };
        for k in 0..n {
            let p = self.lu[(k, k)];
            if p.norm() == 0.0 {
                return Scaled::ZERO;
            }
            d = d.mul(&Scaled::from_c64(p));
        }
        d
    }

    /// Smallest pivot magnitude relative to the largest (crude rank signal).
    pub fn pivot_ratio(&self) -> f64 {
        let n = self.lu.n;
        let mags: Vec<f64> = (0..n).map(|k| self.lu[(k, k)].norm()).collect();
        let hi = mags.iter().cloned().fold(0.0, f64::max);
        let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            // forward elimination applied on the fly
            let xk = x[k];
            if xk != C64::new(0.0, 0.0) {
                for i in k + 1..n {
                    let f = self.lu[(i, k)];
                    x[i] -= f * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            let d = self.lu[(i, i)];
            x[i] = if d.norm() == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                s / d
            };
        }
        x
    }
}

pub fn det_scaled(a: CMat) -> Scaled {
    lu_factor(a).det_scaled()
}

/// Solve A X = B for a matrix right-hand side.
pub fn solve_matrix(a: CMat, b: &CMat) -> CMat {
    assert_eq!(a.n, b.n);
    let lu = lu_factor(a);
    let mut out = CMat::zeros(b.n, b.m);
    let mut col = vec![C64::new(0.0, 0.0); b.n];
    for j in 0..b.m {
        for i in 0..b.n {
            col[i] = b[(i, j)];
        }
        let x = lu.solve(&col);
        for i in 0..b.n {
            out[(i, j)] = x[i];
        }
    }
    out
}

pub fn inverse(a: CMat) -> CMat {
    let n = a.n;
    solve_matrix(a, &CMat::identity(n))
}

fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Approximate null vector of a (near-)singular matrix by inverse iteration,
/// together with an estimate of the smallest singular value `||A x|| / ||x||`.
pub fn null_vector(a: &CMat) -> (f64, Vec<C64>) {
    let n = a.n;
    let mut lu = lu_factor(a.clone());
    // regularize exact/near-zero pivots so inverse iteration has a target
    let scale = (0..n)
        .map(|k| lu.lu[(k, k)].norm())
        .fold(0.0, f64::max)
        .max(a.max_abs())
        .max(1e-300);
    for k in 0..n {
        if lu.lu[(k, k)].norm() < 1e-300 * scale {
            lu.lu[(k, k)] = C64::new(1e-150 * scale, 0.0);
        }
    }
    // deterministic, mildly irrational start vector
    let mut x: Vec<C64> = (0..n)
        .map(|i| {
            let t = 0.7548776662466927 * (i as f64 + 1.0);
            C64::new((t % 1.0) + 0.25, ((1.618 * t) % 1.0) - 0.5)
        })
        .collect();
    let nx = norm2(&x);
    for v in x.iter_mut() {
        *v /= nx;
    }
    let mut sigma = f64::INFINITY;
    for _ in 0..6 {
        let y = lu.solve(&x);
        let ny = norm2(&y);
        if !ny.is_finite() || ny == 0.0 {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(y.iter()) {
            *xi = yi / ny;
        }
        let res = norm2(&a.matvec(&x));
        if res >= sigma {
            break;
        }
        sigma = res;
    }
    (norm2(&a.matvec(&x)), x)
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.
/// Returns (eigenvalues, V) with A = V diag(e) V^dagger, columns of V the
/// eigenvectors.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(a.n, a.m);
    let n = a.n;
    let mut h = a.clone();
    let mut v = CMat::identity(n);
    let scale = h.max_abs().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(h[(p, q)].norm());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = h[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = h[(p, p)].re;
                let aqq = h[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // W = I except W[p][p]=c, W[p][q]=s*phase, W[q][p]=-s*conj(phase), W[q][q]=c
                let wpq = s * phase;
                let wqp = -s * phase.conj();
                // H <- W^dagger H W
                for k in 0..n {
                    let hkp = h[(k, p)];
                    let hkq = h[(k, q)];
                    h[(k, p)] = hkp * c + hkq * wqp;
                    h[(k, q)] = hkp * wpq + hkq * c;
                }
                for k in 0..n {
                    let hpk = h[(p, k)];
                    let hqk = h[(q, k)];
                    h[(p, k)] = c * hpk + wqp.conj() * hqk;
                    h[(q, k)] = wpq.conj() * hpk + c * hqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * wqp;
                    v[(k, q)] = vkp * wpq + vkq * c;
                }
            }
        }
    }
    let eig: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
    (eig, v)
}

/// Eigendecomposition of a normal matrix (in practice: unitary coupling
/// matrices) by simultaneous diagonalization of its Hermitian and
/// skew-Hermitian parts. Returns (eigenvalues, V) with columns of V the
/// orthonormal eigenvectors.
pub fn normal_eigen(u: &CMat) -> (Vec<C64>, CMat) {
    let n = u.n;
    let ud = u.dagger();
    let herm = u.add(&ud).scale(C64::new(0.5, 0.0));
    let skew = u.sub(&ud).scale(C64::new(0.0, -0.5));
    let (mut hv, mut v) = hermitian_eigen(&herm);

    // sort by Hermitian-part eigenvalue so clusters are contiguous
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| hv[i].partial_cmp(&hv[j]).unwrap());
    let vs = v.clone();
    let hs = hv.clone();
    for (new, &old) in order.iter().enumerate() {
        hv[new] = hs[old];
        for r in 0..n {
            v[(r, new)] = vs[(r, old)];
        }
    }

    let scale = u.max_abs().max(1.0);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (hv[j] - hv[j - 1]).abs() <= 1e-8 * scale {
            j += 1;
        }
        if j - i > 1 {
            // diagonalize the skew part inside the degenerate block
            let k = j - i;
            let mut block = CMat::zeros(n, k);
            for c in 0..k {
                for r in 0..n {
                    block[(r, c)] = v[(r, i + c)];
                }
            }
            let kb = block.dagger().matmul(&skew.matmul(&block));
            let (_, w) = hermitian_eigen(&kb);
            let rotated = block.matmul(&w);
            for c in 0..k {
                for r in 0..n {
                    v[(r, i + c)] = rotated[(r, c)];
                }
            }
        }
        i = j;
    }

    // Rayleigh quotients give the eigenvalues directly
    let uv = u.matmul(&v);
    let mut eig = Vec::with_capacity(n);
    for c in 0..n {
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for r in 0..n {
            num += v[(r, c)].conj() * uv[(r, c)];
            den += v[(r, c)].norm_sqr();
        }
        eig.push(num / den);
    }
    (eig, v)
}

/// Eigenvalues of a complex upper Hessenberg matrix by Wilkinson-shift QR.
pub fn hessenberg_eigenvalues(mut h: CMat) -> Vec<C64> {
    assert_eq!(h.n, h.m);
    let n = h.n;
    let mut eig = vec![C64::new(0.0, 0.0); n];
    if n == 0 {
        return eig;
    }
    let mut hi = n; // active block is 0..hi
    let mut iters = 0usize;
    let eps = 2.0 * f64::EPSILON;
    while hi > 0 {
        if hi == 1 {
            eig[0] = h[(0, 0)];
            break;
        }
        // deflation scan
        let mut lo = hi - 1;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if h[(lo, lo - 1)].norm() <= eps * s.max(1e-300) {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            eig[hi - 1] = h[(hi - 1, hi - 1)];
            hi -= 1;
            iters = 0;
            continue;
        }
        iters += 1;
        assert!(
            iters < 30 * n + 100,
            "hessenberg QR failed to converge at block size {}",
            hi - lo
        );
        // Wilkinson shift from trailing 2x2
        let a = h[(hi - 2, hi - 2)];
        let b = h[(hi - 2, hi - 1)];
        let c = h[(hi - 1, hi - 2)];
        let d = h[(hi - 1, hi - 1)];
        let tr = a + d;
        let det = a * d - b * c;
        let disc = (tr * tr - det * 4.0).sqrt();
        let mu1 = (tr + disc) * 0.5;
        let mu2 = (tr - disc) * 0.5;
        let mut shift = if (mu1 - d).norm() <= (mu2 - d).norm() {
            mu1
        } else {
            mu2
        };
        if iters % 12 == 0 {
            // exceptional shift to break rare cycling
            shift = d + C64::new(1.5 * c.norm(), 0.5 * c.norm());
        }
        // explicit single-shift QR step on rows lo..hi via Givens rotations
        let m = hi - lo;
        let mut rot: Vec<(C64, C64)> = Vec::with_capacity(m - 1);
        for i in lo..hi {
            h[(i, i)] -= shift;
        }
        for k in lo..hi - 1 {
            let x = h[(k, k)];
            let y = h[(k + 1, k)];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (cg, sg) = if r == 0.0 {
                (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
            } else {
                (x.conj() / r, y.conj() / r)
            };
            rot.push((cg, sg));
            // apply G to rows k, k+1 (columns k..hi)
            for j in k..hi {
                let hk = h[(k, j)];
                let hk1 = h[(k + 1, j)];
                h[(k, j)] = cg * hk + sg * hk1;
                h[(k + 1, j)] = -sg.conj() * hk + cg.conj() * hk1;
            }
        }
        // multiply by G^dagger on the right (columns k, k+1; rows lo..)
        for (idx, &(cg, sg)) in rot.iter().enumerate() {
            let k = lo + idx;
            let top = (k + 2).min(hi);
            for i in lo..top {
                let hik = h[(i, k)];
                let hik1 = h[(i, k + 1)];
                h[(i, k)] = hik * cg.conj() + hik1 * sg.conj();
                h[(i, k + 1)] = -hik * sg + hik1 * cg;
            }
        }
        for i in lo..hi {
            h[(i, i)] += shift;
        }
    }
    eig
}

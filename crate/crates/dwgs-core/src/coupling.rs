//! Unitary vertex couplings (U - I) Psi + i (U + I) Psi' = 0: construction,
//! eigensplit, flower-model assembly, and vertex scattering matrices.

use crate::graph::{GraphError, MetricGraph, SubdivisionMap};
use crate::linalg::{inverse, lu_factor, normal_eigen, solve_matrix, CMat, C64};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("robin coupling is only defined for degree-1 vertices, got degree {0}")]
    RobinDegree(usize),
    #[error("coupling at vertex `{vertex}` has dimension {got}, vertex degree is {want}")]
    DegreeMismatch {
        vertex: String,
        got: usize,
        want: usize,
    },
    #[error("coupling condition is resonant at this lambda (singular scattering system)")]
    SingularScattering,
    #[error("need one coupling per vertex: got {got}, graph has {want}")]
    CouplingCount { got: usize, want: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingKind {
    Standard,
    Dirichlet,
    Neumann,
    Delta(f64),
    DeltaPrimeS(f64),
    Robin(f64),
    Custom,
}

/// Eigensplit of a unitary U: eigenvalues within 1e-9 of -1 and +1 are
/// snapped and counted; the rest stay on the unit circle in `d_phases`.
/// `v` satisfies U = V^dagger diag(-I_{n-}, I_{n+}, D) V.
#[derive(Debug, Clone)]
pub struct EigenSplit {
    pub n_minus: usize,
    pub n_plus: usize,
    pub d_phases: Vec<C64>,
    pub v: CMat,
}

#[derive(Debug, Clone)]
pub struct UnitaryCoupling {
    pub matrix: CMat,
    pub kind: CouplingKind,
    pub split: EigenSplit,
}

pub const SNAP_TOL: f64 = 1e-9;
pub const UNITARITY_TOL: f64 = 1e-12;

fn unitarity_deviation(u: &CMat) -> f64 {
    let utu = u.dagger().matmul(u);
    let mut dev = 0.0f64;
    for i in 0..u.n {
        for j in 0..u.n {
            let want = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((utu[(i, j)] - C64::new(want, 0.0)).norm());
        }
    }
    dev
}

pub fn eigensplit(u: &CMat) -> EigenSplit {
    let (eig, w) = normal_eigen(u);
    let n = u.n;
    // order eigenvectors as (-1 block, +1 block, D block)
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    let mut rest = Vec::new();
    for (k, mu) in eig.iter().enumerate() {
        if (mu + C64::new(1.0, 0.0)).norm() < SNAP_TOL {
            minus.push(k);
        } else if (mu - C64::new(1.0, 0.0)).norm() < SNAP_TOL {
            plus.push(k);
        } else {
            rest.push(k);
        }
    }
    let order: Vec<usize> = minus
        .iter()
        .chain(plus.iter())
        .chain(rest.iter())
        .cloned()
        .collect();
    // V = W^dagger with columns permuted into block order
    let mut v = CMat::zeros(n, n);
    for (row, &k) in order.iter().enumerate() {
        for c in 0..n {
            v[(row, c)] = w[(c, k)].conj();
        }
    }
    EigenSplit {
        n_minus: minus.len(),
        n_plus: plus.len(),
        d_phases: rest.iter().map(|&k| eig[k]).collect(),
        v,
    }
}

impl UnitaryCoupling {
    pub fn from_matrix(matrix: CMat, kind: CouplingKind) -> Result<UnitaryCoupling, CouplingError> {
        let dev = unitarity_deviation(&matrix);
        if dev >= UNITARITY_TOL {
            return Err(CouplingError::NotUnitary(dev));
        }
        let split = eigensplit(&matrix);
        Ok(UnitaryCoupling {
            matrix,
            kind,
            split,
        })
    }

    pub fn custom(matrix: CMat) -> Result<UnitaryCoupling, CouplingError> {
        UnitaryCoupling::from_matrix(matrix, CouplingKind::Custom)
    }

    pub fn degree(&self) -> usize {
        self.matrix.n
    }

    /// Leading-order vertex scattering matrix
    /// sigma_0 = V^dagger diag(-I_{n-}, I_{n+}, I) V; unitary and involutive.
    pub fn scattering_leading_term(&self) -> CMat {
        let d = self.degree();
        let mut diag = CMat::zeros(d, d);
        for i in 0..d {
            diag[(i, i)] = if i < self.split.n_minus {
                C64::new(-1.0, 0.0)
            } else {
                C64::new(1.0, 0.0)
            };
        }
        self.split
            .v
            .dagger()
            .matmul(&diag)
            .matmul(&self.split.v)
    }

    /// Exact vertex scattering matrix at channel exponents Lambda = diag(lt_e):
    /// sigma = -[(U-I) - i(U+I) Lambda]^{-1} [(U-I) + i(U+I) Lambda]
    /// for waves alpha_in e^{lt x} + alpha_out e^{-lt x} at x = 0.
    pub fn scattering_exact(&self, lambdas: &[C64]) -> Result<CMat, CouplingError> {
        let d = self.degree();
        assert_eq!(lambdas.len(), d);
        let u = &self.matrix;
        let mut m = CMat::zeros(d, d);
        let mut nrh = CMat::zeros(d, d);
        let i_unit = C64::new(0.0, 1.0);
        for r in 0..d {
            for c in 0..d {
                let u_mi = u[(r, c)] - if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                let u_pi = u[(r, c)] + if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                m[(r, c)] = u_mi - i_unit * u_pi * lambdas[c];
                nrh[(r, c)] = u_mi + i_unit * u_pi * lambdas[c];
            }
        }
        let lu = lu_factor(m.clone());
        if lu.pivot_ratio() < 1e-13 {
            return Err(CouplingError::SingularScattering);
        }
        Ok(solve_matrix(m, &nrh).scale(C64::new(-1.0, 0.0)))
    }
}

/// The named coupling matrices.
pub fn named_coupling(kind: CouplingKind, degree: usize) -> Result<UnitaryCoupling, CouplingError> {
    assert!(degree >= 1);
    let d = degree;
    let j_over = |w: C64| {
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                m[(i, k)] = w;
            }
        }
        m
    };
    let matrix = match kind {
        CouplingKind::Standard => {
            let mut m = j_over(C64::new(2.0 / d as f64, 0.0));
            for i in 0..d {
                m[(i, i)] -= C64::new(1.0, 0.0);
            }
            m
        }
        CouplingKind::Dirichlet => CMat::identity(d).scale(C64::new(-1.0, 0.0)),
        CouplingKind::Neumann => CMat::identity(d),
        CouplingKind::Delta(alpha) => {
            let mut m = j_over(C64::new(2.0, 0.0) / C64::new(d as f64, alpha));
            for i in 0..d {
                m[(i, i)] -= C64::new(1.0, 0.0);
            }
            m
        }
        CouplingKind::DeltaPrimeS(beta) => {
            let mut m = j_over(-(C64::new(2.0, 0.0) / C64::new(d as f64, -beta)));
            for i in 0..d {
                m[(i, i)] += C64::new(1.0, 0.0);
            }
            m
        }
        CouplingKind::Robin(theta) => {
            if d != 1 {
                return Err(CouplingError::RobinDegree(d));
            }
            let mut m = CMat::zeros(1, 1);
            m[(0, 0)] = C64::from_polar(1.0, theta);
            m
        }
        CouplingKind::Custom => panic!("custom couplings need UnitaryCoupling::custom"),
    };
    UnitaryCoupling::from_matrix(matrix, kind)
}

/// The global 2N x 2N flower-model coupling matrix in the endpoint-slot
/// basis (edges sorted by id, tail slot before head slot), block diagonal
/// over vertices.
#[derive(Debug, Clone)]
pub struct FlowerAssembly {
    pub matrix: CMat,
    pub n_edges: usize,
    /// slot -> (vertex, channel index at that vertex)
    pub slot_channel: Vec<(usize, usize)>,
}

pub fn assemble_flower(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
) -> Result<FlowerAssembly, CouplingError> {
    if couplings.len() != graph.n_vertices() {
        return Err(CouplingError::CouplingCount {
            got: couplings.len(),
            want: graph.n_vertices(),
        });
    }
    let slots = graph.vertex_slots();
    for (v, s) in slots.iter().enumerate() {
        if couplings[v].degree() != s.len() {
            return Err(CouplingError::DegreeMismatch {
                vertex: graph.vertex_ids()[v].clone(),
                got: couplings[v].degree(),
                want: s.len(),
            });
        }
    }
    let n2 = 2 * graph.n_edges();
    let mut matrix = CMat::zeros(n2, n2);
    let mut slot_channel = vec![(0usize, 0usize); n2];
    for (v, s) in slots.iter().enumerate() {
        let u = &couplings[v].matrix;
        for (i, &si) in s.iter().enumerate() {
            slot_channel[si] = (v, i);
            for (j, &sj) in s.iter().enumerate() {
                matrix[(si, sj)] = u[(i, j)];
            }
        }
    }
    Ok(FlowerAssembly {
        matrix,
        n_edges: graph.n_edges(),
        slot_channel,
    })
}

/// Coupling matrix transformation of the scaling lemma:
/// U_l0 = [(l0-1)U + (l0+1)I]^{-1} [(l0+1)U + (l0-1)I].
pub fn mobius_scale(u: &CMat, l0: f64) -> CMat {
    let d = u.n;
    let a = u
        .scale(C64::new(l0 - 1.0, 0.0))
        .add(&CMat::identity(d).scale(C64::new(l0 + 1.0, 0.0)));
    let b = u
        .scale(C64::new(l0 + 1.0, 0.0))
        .add(&CMat::identity(d).scale(C64::new(l0 - 1.0, 0.0)));
    // (l0-1)U + (l0+1)I is invertible for unitary U and l0 > 0
    inverse(a).matmul(&b)
}

/// Scale a unit-equilateral graph to edge length l0: lengths times l0,
/// damping / l0, potential / l0^2, couplings Moebius-transformed.
/// Eigenvalues map as lambda -> lambda / l0.
pub fn scale_graph(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
    l0: f64,
) -> Result<(MetricGraph, Vec<UnitaryCoupling>), CouplingError> {
    if graph.is_equilateral(1e-9).map(|l| (l - 1.0).abs()) > Some(1e-9) {
        return Err(GraphError::NotUnitEquilateral.into());
    }
    let scaled = graph.scaled_geometry(l0);
    let new_couplings = couplings
        .iter()
        .map(|c| UnitaryCoupling::from_matrix(mobius_scale(&c.matrix, l0), c.kind.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((scaled, new_couplings))
}

/// Bring an equilateral graph with edge length c to unit edges (the inverse
/// scaling map). Returns the unit graph, transformed couplings and the
/// factor c, so that unit-graph eigenvalues are c times the original ones.
pub fn rescale_to_unit(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
) -> Result<(MetricGraph, Vec<UnitaryCoupling>, f64), CouplingError> {
    let Some(c) = graph.is_equilateral(1e-9) else {
        return Err(GraphError::NotUnitEquilateral.into());
    };
    let unit = graph.scaled_geometry(1.0 / c);
    let new_couplings = couplings
        .iter()
        .map(|u| UnitaryCoupling::from_matrix(mobius_scale(&u.matrix, 1.0 / c), u.kind.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((unit, new_couplings, c))
}

/// Subdivide, propagating couplings: original vertices keep theirs, the
/// inserted degree-2 vertices get standard coupling (leading-order
/// pass-through, exact for standard).
pub fn subdivide_with_couplings(
    graph: &MetricGraph,
    couplings: &[UnitaryCoupling],
    l0: f64,
) -> Result<(MetricGraph, Vec<UnitaryCoupling>, SubdivisionMap), CouplingError> {
    let (sub, map) = graph.subdivide_to_equilateral(l0)?;
    let mut new_couplings = couplings.to_vec();
    for _ in map.n_original..sub.n_vertices() {
        new_couplings.push(named_coupling(CouplingKind::Standard, 2)?);
    }
    Ok((sub, new_couplings, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::profile::CoefficientProfile;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mat_close(a: &CMat, b: &CMat, tol: f64) -> bool {
        a.n == b.n && a.m == b.m && a.sub(b).max_abs() < tol
    }

    #[test]
    fn named_matrices() {
        let std2 = named_coupling(CouplingKind::Standard, 2).unwrap();
        assert!(mat_close(
            &std2.matrix,
            &CMat::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]),
            1e-15
        ));
        let dir = named_coupling(CouplingKind::Dirichlet, 1).unwrap();
        assert_eq!(dir.matrix[(0, 0)], c(-1.0, 0.0));
        // delta(0) equals standard
        let d0 = named_coupling(CouplingKind::Delta(0.0), 3).unwrap();
        let st = named_coupling(CouplingKind::Standard, 3).unwrap();
        assert!(mat_close(&d0.matrix, &st.matrix, 1e-15));
        assert!(named_coupling(CouplingKind::Robin(0.4), 2).is_err());
    }

    #[test]
    fn all_named_are_unitary() {
        for d in 1..=6 {
            for kind in [
                CouplingKind::Standard,
                CouplingKind::Dirichlet,
                CouplingKind::Neumann,
                CouplingKind::Delta(1.3),
                CouplingKind::Delta(-0.7),
                CouplingKind::DeltaPrimeS(2.1),
            ] {
                let u = named_coupling(kind, d).unwrap();
                assert!(unitarity_deviation(&u.matrix) < 1e-13);
            }
        }
        let r = named_coupling(CouplingKind::Robin(1.1), 1).unwrap();
        assert!(unitarity_deviation(&r.matrix) < 1e-15);
    }

    #[test]
    fn eigensplit_counts() {
        // standard d=3: spectrum {1, -1, -1}
        let st = named_coupling(CouplingKind::Standard, 3).unwrap();
        assert_eq!((st.split.n_minus, st.split.n_plus), (2, 1));
        assert!(st.split.d_phases.is_empty());
        // delta(1), d=2: one -1, one (2-i)/(2+i)
        let dl = named_coupling(CouplingKind::Delta(1.0), 2).unwrap();
        assert_eq!((dl.split.n_minus, dl.split.n_plus), (1, 0));
        assert_eq!(dl.split.d_phases.len(), 1);
        let want = c(2.0, -1.0) / c(2.0, 1.0);
        assert!((dl.split.d_phases[0] - want).norm() < 1e-10);
        // identity
        let id = named_coupling(CouplingKind::Neumann, 4).unwrap();
        assert_eq!((id.split.n_minus, id.split.n_plus), (0, 4));
    }

    #[test]
    fn eigensplit_reconstructs_u() {
        for coupling in [
            named_coupling(CouplingKind::Standard, 4).unwrap(),
            named_coupling(CouplingKind::Delta(0.8), 3).unwrap(),
            named_coupling(CouplingKind::DeltaPrimeS(-1.2), 5).unwrap(),
            named_coupling(CouplingKind::Robin(2.0), 1).unwrap(),
        ] {
            let d = coupling.degree();
            let s = &coupling.split;
            assert_eq!(s.n_minus + s.n_plus + s.d_phases.len(), d);
            let mut diag = CMat::zeros(d, d);
            for i in 0..d {
                diag[(i, i)] = if i < s.n_minus {
                    c(-1.0, 0.0)
                } else if i < s.n_minus + s.n_plus {
                    c(1.0, 0.0)
                } else {
                    s.d_phases[i - s.n_minus - s.n_plus]
                };
            }
            let rebuilt = s.v.dagger().matmul(&diag).matmul(&s.v);
            assert!(mat_close(&rebuilt, &coupling.matrix, 1e-10));
            for p in &s.d_phases {
                assert!((p + c(1.0, 0.0)).norm() > SNAP_TOL);
                assert!((p - c(1.0, 0.0)).norm() > SNAP_TOL);
            }
        }
    }

    #[test]
    fn sigma0_unitary_involutive_and_known_values() {
        for d in 2..=5 {
            let st = named_coupling(CouplingKind::Standard, d).unwrap();
            let s0 = st.scattering_leading_term();
            // sigma0 for standard equals (2/d)J - I
            assert!(mat_close(&s0, &st.matrix, 1e-10));
            let sq = s0.matmul(&s0);
            assert!(mat_close(&sq, &CMat::identity(d), 1e-10));
        }
        // delta'_s: -1 not in spectrum -> sigma0 = I
        let dp = named_coupling(CouplingKind::DeltaPrimeS(1.5), 3).unwrap();
        assert!(mat_close(
            &dp.scattering_leading_term(),
            &CMat::identity(3),
            1e-10
        ));
        // delta(alpha): sigma0 equals standard's
        let dl = named_coupling(CouplingKind::Delta(2.5), 4).unwrap();
        let st = named_coupling(CouplingKind::Standard, 4).unwrap();
        assert!(mat_close(
            &dl.scattering_leading_term(),
            &st.scattering_leading_term(),
            1e-10
        ));
    }

    #[test]
    fn scattering_exact_known_cases() {
        let ones = vec![c(1.0, 0.0); 3];
        let nm = named_coupling(CouplingKind::Neumann, 3).unwrap();
        assert!(mat_close(
            &nm.scattering_exact(&ones).unwrap(),
            &CMat::identity(3),
            1e-12
        ));
        let dr = named_coupling(CouplingKind::Dirichlet, 3).unwrap();
        assert!(mat_close(
            &dr.scattering_exact(&ones).unwrap(),
            &CMat::identity(3).scale(c(-1.0, 0.0)),
            1e-12
        ));
        let st = named_coupling(CouplingKind::Standard, 2).unwrap();
        let sig = st.scattering_exact(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(mat_close(&sig, &st.matrix, 1e-12));
    }

    #[test]
    fn sigma_converges_to_sigma0_at_rate_one_over_n() {
        // lt = 2 pi i n + c per channel; || sigma(n) - sigma0 || * n stays bounded
        let coupling = named_coupling(CouplingKind::Delta(1.7), 3).unwrap();
        let s0 = coupling.scattering_leading_term();
        let mut scaled_devs = Vec::new();
        for &n in &[10.0, 20.0, 40.0, 80.0] {
            let lt = vec![c(0.3, 2.0 * std::f64::consts::PI * n); 3];
            let sig = coupling.scattering_exact(&lt).unwrap();
            scaled_devs.push(sig.sub(&s0).max_abs() * n);
        }
        let base = scaled_devs[0];
        for d in &scaled_devs {
            assert!(*d < 2.0 * base + 1e-9, "O(1/n) convergence violated: {scaled_devs:?}");
        }
    }

    #[test]
    fn boundary_form_identity_on_random_coupling_solutions() {
        // -Psi^dagger Psi' = sum tan(phi_s/2) |Psi_3s|^2 for every solution of
        // the coupling condition, generated as Psi = (U+I)w, Psi' = i(U-I)w
        let mut seed = 0xdeadbeef12345678u64;
        let mut rnd = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for kind in [
            CouplingKind::Delta(1.0),
            CouplingKind::DeltaPrimeS(0.6),
            CouplingKind::Standard,
        ] {
            let coupling = named_coupling(kind, 3).unwrap();
            let d = 3;
            for _ in 0..20 {
                let w: Vec<C64> = (0..d).map(|_| c(rnd(), rnd())).collect();
                let u = &coupling.matrix;
                let mut psi = vec![c(0.0, 0.0); d];
                let mut dpsi = vec![c(0.0, 0.0); d];
                for i in 0..d {
                    for j in 0..d {
                        let uij = u[(i, j)];
                        let idy = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                        psi[i] += (uij + idy) * w[j];
                        dpsi[i] += c(0.0, 1.0) * (uij - idy) * w[j];
                    }
                }
                let lhs: C64 = -psi
                    .iter()
                    .zip(dpsi.iter())
                    .map(|(p, q)| p.conj() * q)
                    .sum::<C64>();
                let s = &coupling.split;
                let vpsi = s.v.matvec(&psi);
                let mut rhs = 0.0;
                for (k, ph) in s.d_phases.iter().enumerate() {
                    let t = ph.im / (1.0 + ph.re);
                    rhs += t * vpsi[s.n_minus + s.n_plus + k].norm_sqr();
                }
                assert!(
                    (lhs - c(rhs, 0.0)).norm() < 1e-10,
                    "boundary form mismatch: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn mobius_scaling_fixed_points_and_example() {
        // l0 = 1 is the identity map
        let st = named_coupling(CouplingKind::Delta(0.9), 3).unwrap();
        assert!(mat_close(&mobius_scale(&st.matrix, 1.0), &st.matrix, 1e-12));
        // matrices with only +-1 eigenvalues are fixed for any l0
        let s2 = named_coupling(CouplingKind::Standard, 4).unwrap();
        assert!(mat_close(&mobius_scale(&s2.matrix, 2.75), &s2.matrix, 1e-10));
        // scalar U = i, l0 = 2: (3i+1)/(i+3) = (6+8i)/10, unimodular
        let mut u = CMat::zeros(1, 1);
        u[(0, 0)] = c(0.0, 1.0);
        let u2 = mobius_scale(&u, 2.0);
        assert!((u2[(0, 0)] - c(0.6, 0.8)).norm() < 1e-14);
        assert!((u2[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    fn unit_edge(id: &str, tail: usize, head: usize) -> Edge {
        Edge {
            id: id.to_string(),
            tail,
            head,
            length: 1.0,
            damping: CoefficientProfile::constant(0.0, 1.0),
            potential: CoefficientProfile::constant(0.0, 1.0),
        }
    }

    #[test]
    fn flower_assembly_single_edge_and_star() {
        let names = |n: usize| (0..n).map(|i| format!("v{i}")).collect::<Vec<_>>();
        let g = MetricGraph::new(names(2), vec![unit_edge("e", 0, 1)]).unwrap();
        let cs = vec![
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
        ];
        let fl = assemble_flower(&g, &cs).unwrap();
        assert!(mat_close(
            &fl.matrix,
            &CMat::identity(2).scale(c(-1.0, 0.0)),
            1e-15
        ));

        let star = MetricGraph::new(
            names(4),
            vec![
                unit_edge("e1", 0, 1),
                unit_edge("e2", 0, 2),
                unit_edge("e3", 0, 3),
            ],
        )
        .unwrap();
        let cs = vec![
            named_coupling(CouplingKind::Standard, 3).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
        ];
        let fl = assemble_flower(&star, &cs).unwrap();
        // tail slots 0, 2, 4 form the standard 3x3 block; head slots are -1
        for (i, si) in [0usize, 2, 4].iter().enumerate() {
            for (j, sj) in [0usize, 2, 4].iter().enumerate() {
                let want = if i == j { -1.0 / 3.0 } else { 2.0 / 3.0 };
                assert!((fl.matrix[(*si, *sj)] - c(want, 0.0)).norm() < 1e-14);
            }
        }
        for s in [1usize, 3, 5] {
            assert!((fl.matrix[(s, s)] - c(-1.0, 0.0)).norm() < 1e-14);
        }
        // degree mismatch is an error
        let bad = vec![
            named_coupling(CouplingKind::Standard, 2).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
            named_coupling(CouplingKind::Dirichlet, 1).unwrap(),
        ];
        assert!(matches!(
            assemble_flower(&star, &bad),
            Err(CouplingError::DegreeMismatch { .. })
        ));
    }
}

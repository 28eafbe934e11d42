//! Dense complex linear algebra for the small Hilbert spaces this crate
//! works with (dimension 2 to a few dozen).
//!
//! The eigensolver is a cyclic complex Jacobi iteration. Each rotation first
//! removes the phase of the pivot element with a diagonal unitary, then
//! applies the real symmetric Jacobi rotation, so a Hermitian matrix is
//! driven to real diagonal form by a product of unitary plane rotations.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const DEGENERACY_GAP: f64 = 1e-10;
const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(*v, 0.0);
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let dim = columns.len();
        let mut m = Self::zeros(dim.max(1));
        for (j, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: col.len(),
                });
            }
            for (i, z) in col.iter().enumerate() {
                m[(i, j)] = *z;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len(), "matrix-vector dimension mismatch");
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entrywise modulus of `H - H^dagger`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entrywise max distance to another matrix.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |U^dagger U - I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint()
            .matmul(self)
            .max_diff(&Self::identity(self.dim))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Pauli matrices.
pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix {
        dim: 2,
        data: vec![ZERO, ONE, ONE, ZERO],
    }
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix {
        dim: 2,
        data: vec![ZERO, -I, I, ZERO],
    }
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix {
        dim: 2,
        data: vec![ONE, ZERO, ZERO, -ONE],
    }
}

/// `exp(-i angle sigma) = cos(angle) I - i sin(angle) sigma` for a Pauli
/// matrix `sigma` (any matrix squaring to the identity).
pub fn pauli_exp(sigma: &ComplexMatrix, angle: f64) -> ComplexMatrix {
    let (s, c) = angle.sin_cos();
    &ComplexMatrix::identity(sigma.dim()).scale_re(c) + &sigma.scale(Complex64::new(0.0, -s))
}

// Vector helpers. States are plain `Vec<Complex64>` / `&[Complex64]`.

/// `<a|b>`, antilinear in the first argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

/// Euclidean distance `||a - b||`.
pub fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `|<a|b>|^2` for unit vectors.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    inner(a, b).norm_sqr()
}

pub fn basis_vector(dim: usize, k: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; dim];
    v[k] = ONE;
    v
}

/// Eigenvalues in ascending order and matching unit eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[n]` is the eigenvector for `values[n]`.
    pub vectors: Vec<Vec<Complex64>>,
    /// Set when two consecutive eigenvalues are closer than 1e-10.
    pub degenerate: bool,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// `V diag(values) V^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n);
        for (e, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += v[i] * v[j].conj() * *e;
                }
            }
        }
        out
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Values come back ascending. Each eigenvector is phased so that its
/// largest-magnitude entry is real and positive (first such entry on ties).
pub fn eigh(h: &ComplexMatrix) -> Result<EigenDecomposition> {
    let max_asymmetry = h.max_asymmetry();
    if max_asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { max_asymmetry });
    }
    let n = h.dim();
    let mut a = h.clone();
    // Symmetrize so rounding-level asymmetry does not leak into the result.
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    let target = JACOBI_OFF_TOL * scale.max(f64::MIN_POSITIVE);

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(format!(
                "Jacobi eigensolver: off-diagonal norm {:e} after {} sweeps",
                off_norm(&a),
                sweeps
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let zeta = (aqq - app) / (2.0 * r);
                let t = if zeta.is_infinite() {
                    0.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Plane rotation J = diag(1, conj(phase)) * [[c, s], [-s, c]]
                // acting on (p, q).
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = phase.conj() * (-s);
                let jqq = phase.conj() * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A <- J^dagger A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                // V <- V J
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
        converged = off_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&j| {
            let mut col = v.column(j);
            normalize(&mut col);
            canonical_phase(&mut col);
            col
        })
        .collect();
    let degenerate = values.windows(2).any(|w| w[1] - w[0] < DEGENERACY_GAP);
    Ok(EigenDecomposition {
        values,
        vectors,
        degenerate,
    })
}

/// Rotate `v` so its largest-magnitude entry is real positive.
pub fn canonical_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-10))
        .unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= phase);
}

/// `exp(-i H dt) psi`, evaluated through the eigendecomposition of `H`, so
/// the map is unitary up to rounding. Two-level matrices use the closed-form
/// decomposition `H = a0 I + r n.sigma` instead of the iterative solver.
pub fn propagate_step(h: &ComplexMatrix, dt: f64, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    if !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite time step {dt}")));
    }
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi.len(),
        });
    }
    if h.dim() == 2 {
        return propagate_two_level(h, dt, psi);
    }
    let eig = eigh(h)?;
    let mut out = vec![ZERO; psi.len()];
    for (e, v) in eig.values.iter().zip(&eig.vectors) {
        let amp = inner(v, psi) * Complex64::from_polar(1.0, -e * dt);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += amp * vi;
        }
    }
    Ok(out)
}

fn propagate_two_level(h: &ComplexMatrix, dt: f64, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    let asym = (h[(0, 1)] - h[(1, 0)].conj())
        .norm_sqr()
        .max(4.0 * h[(0, 0)].im.powi(2))
        .max(4.0 * h[(1, 1)].im.powi(2));
    if asym > HERMITIAN_TOL * HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            max_asymmetry: h.max_asymmetry(),
        });
    }
    let (a, d) = (h[(0, 0)].re, h[(1, 1)].re);
    let b = h[(0, 1)];
    let mean = 0.5 * (a + d);
    let z = 0.5 * (a - d);
    let r = (z * z + b.norm_sqr()).sqrt();
    let (s, c) = (r * dt).sin_cos();
    // sin(r dt) / r, finite as r -> 0
    let sinc = if r * dt.abs() < 1e-8 { dt } else { s / r };
    let phase = Complex64::from_polar(1.0, -mean * dt);
    let minus_i_sinc = Complex64::new(0.0, -sinc);
    let n0 = psi[0] * z + b * psi[1];
    let n1 = b.conj() * psi[0] - psi[1] * z;
    Ok(vec![
        phase * (psi[0] * c + minus_i_sinc * n0),
        phase * (psi[1] * c + minus_i_sinc * n1),
    ])
}

/// The unitary `exp(-i H dt)` itself.
pub fn expm_hermitian(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    let eig = eigh(h)?;
    let n = h.dim();
    let mut out = ComplexMatrix::zeros(n);
    for (e, v) in eig.values.iter().zip(&eig.vectors) {
        let ph = Complex64::from_polar(1.0, -e * dt);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j].conj() * ph;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sigma_z_eigenpairs() {
        let eig = eigh(&sigma_z()).unwrap();
        assert_eq!(eig.values, vec![-1.0, 1.0]);
        assert!(distance(&eig.vectors[0], &basis_vector(2, 1)) < 1e-15);
        assert!(distance(&eig.vectors[1], &basis_vector(2, 0)) < 1e-15);
        assert!(!eig.degenerate);
    }

    #[test]
    fn spin_half_levels_at_any_tau() {
        let xi = 0.1;
        let omega = (1.0_f64 + xi * xi).sqrt();
        for tau in [0.0, 0.3, 1.7, 4.0] {
            let phi = 2.0 * tau;
            let h = &(&sigma_z() + &sigma_x().scale_re(xi * f64::cos(phi)))
                + &sigma_y().scale_re(xi * f64::sin(phi));
            let eig = eigh(&h).unwrap();
            assert!((eig.values[0] + omega).abs() < 1e-14);
            assert!((eig.values[1] - omega).abs() < 1e-14);
        }
        assert!((omega - 1.0049876).abs() < 1e-7);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[&[c(1.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)]])
            .unwrap();
        match eigh(&m) {
            Err(Error::NotHermitian { max_asymmetry }) => assert!((max_asymmetry - 1.0).abs() < 1e-15),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn flags_degeneracy() {
        let eig = eigh(&ComplexMatrix::identity(3)).unwrap();
        assert!(eig.degenerate);
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn canonical_gauge_is_largest_entry_real_positive() {
        let h = ComplexMatrix::from_rows(&[&[c(0.3, 0.0), c(0.2, -0.7)], &[c(0.2, 0.7), c(-1.1, 0.0)]])
            .unwrap();
        let eig = eigh(&h).unwrap();
        for v in &eig.vectors {
            let k = if v[0].norm() >= v[1].norm() { 0 } else { 1 };
            assert!(v[k].im.abs() < 1e-15 && v[k].re > 0.0);
        }
        assert!(eig.reconstruct().max_diff(&h) < 1e-14);
    }

    #[test]
    fn zero_hamiltonian_is_identity_propagator() {
        let psi = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let out = propagate_step(&ComplexMatrix::zeros(2), 3.7, &psi).unwrap();
        assert!(distance(&out, &psi) < 1e-15);
    }

    #[test]
    fn sigma_z_half_turn() {
        let out = propagate_step(&sigma_z(), PI, &basis_vector(2, 0)).unwrap();
        assert!(distance(&out, &[c(-1.0, 0.0), c(0.0, 0.0)]) < 1e-15);
    }

    #[test]
    fn sigma_x_quarter_turn_matches_closed_form() {
        // exp(-i sigma_x t) = cos t I - i sin t sigma_x
        let t = PI / 2.0;
        let out = propagate_step(&sigma_x(), t, &basis_vector(2, 0)).unwrap();
        let closed = pauli_exp(&sigma_x(), t).apply(&basis_vector(2, 0));
        assert!(distance(&out, &closed) < 1e-15);
        assert!(distance(&out, &[c(0.0, 0.0), c(0.0, -1.0)]) < 1e-15);
    }

    #[test]
    fn pauli_exp_is_unitary() {
        for s in [sigma_x(), sigma_y(), sigma_z()] {
            assert!(pauli_exp(&s, 0.731).unitarity_defect() < 1e-15);
        }
    }

    #[test]
    fn propagate_rejects_wrong_dimension() {
        assert!(matches!(
            propagate_step(&sigma_x(), 0.1, &basis_vector(3, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

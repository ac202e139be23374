//! Self-contained dense complex linear algebra.
//!
//! [`CMatrix`] is the universal numeric carrier for operators, states, and
//! Choi matrices throughout the crate. The kernel provides exactly what the
//! higher layers need: Kronecker products, partial traces, a Hermitian
//! eigensolver ([`herm_eig`]), Gram factorization of positive semidefinite
//! matrices, regularized polar parts ([`regularized_polar`]), and commutant
//! bases computed as Sylvester null spaces ([`commutant_basis`]).
//!
//! All decompositions are deterministic: the eigensolver is a cyclic complex
//! Jacobi iteration with fixed sweep order, eigenvalues are returned in
//! ascending order, and degenerate eigenspaces are ordered by a fixed
//! lexicographic tie-break so repeated runs produce identical output.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used across the crate.
pub type C64 = Complex64;

/// Shorthand for a real complex scalar.
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Shorthand for a general complex scalar.
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix with row-major storage.
///
/// Column vectors are represented as `n x 1` matrices. All entries are
/// required to be finite; constructors reject NaN and infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        if !entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Invalid("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    /// Zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = cr(1.0);
        }
        m
    }

    /// Builds a matrix entrywise from a closure.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    /// Builds a matrix from nested rows (convenience for literals in tests).
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    /// Column vector from a slice of complex entries.
    pub fn col_vec(v: &[C64]) -> Self {
        Self { rows: v.len(), cols: 1, entries: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Entry accessor.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.cols + j]
    }

    /// Entry mutator (used by builders; values stay immutable once shared).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.entries[i * self.cols + j] = v;
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    /// Transpose without conjugation.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    /// Entrywise conjugate.
    pub fn conj(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.at(i, j).conj())
    }

    /// Matrix sum.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    /// Matrix difference.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        }
    }

    /// Scalar multiple.
    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    /// Matrix product.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "mul shape {}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols);
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            for l in 0..k {
                let a = self.entries[i * k + l];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.entries[l * m..(l + 1) * m];
                let dst = &mut out[i * m..(i + 1) * m];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Self { rows: n, cols: m, entries: out }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius distance to another matrix.
    pub fn dist(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }

    /// Trace.
    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of non-square");
        (0..self.rows).map(|i| self.at(i, i)).sum()
    }

    /// Hermitian inner product `<self, other> = tr(other^dagger self)`,
    /// i.e. the Frobenius pairing, conjugate-linear in `other`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "inner shape");
        self.entries.iter().zip(&other.entries).map(|(a, b)| b.conj() * a).sum()
    }

    /// `‖self − self^dagger‖_F`.
    pub fn herm_residual(&self) -> f64 {
        self.dist(&self.dagger())
    }

    /// Extracts a single column as a column vector.
    pub fn column(&self, j: usize) -> Self {
        Self::from_fn(self.rows, 1, |i, _| self.at(i, j))
    }

    /// Horizontal stack of column blocks.
    pub fn hstack(blocks: &[&Self]) -> Self {
        let rows = blocks[0].rows;
        assert!(blocks.iter().all(|b| b.rows == rows), "hstack rows");
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut off = 0;
        for b in blocks {
            for i in 0..rows {
                for j in 0..b.cols {
                    out.set(i, off + j, b.at(i, j));
                }
            }
            off += b.cols;
        }
        out
    }

    /// Copies `block` into `self` with upper-left corner at `(i0, j0)`.
    pub fn insert(&mut self, i0: usize, j0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(i0 + i, j0 + j, block.at(i, j));
            }
        }
    }

    /// Extracts the sub-block of shape `(r, c)` with upper-left corner `(i0, j0)`.
    pub fn block(&self, i0: usize, j0: usize, r: usize, c: usize) -> Self {
        Self::from_fn(r, c, |i, j| self.at(i0 + i, j0 + j))
    }
}

/// Kronecker product: `(a ⊗ b)[(i·rb+k),(j·cb+l)] = a[i,j]·b[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = (a.rows(), a.cols());
    let (rb, cb) = (b.rows(), b.cols());
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a.at(i, j);
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out.set(i * rb + k, j * cb + l, aij * b.at(k, l));
                }
            }
        }
    }
    out
}

/// Side designator for [`partial_trace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Partial trace of a square matrix on `C^dA ⊗ C^dB` over the designated
/// factor: `Side::A` traces out the first factor (returning a `dB x dB`
/// matrix), `Side::B` the second.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), side: Side) -> Result<CMatrix> {
    let (da, db) = dims;
    if !m.is_square() || m.rows() != da * db {
        return Err(Error::Dimension(format!(
            "partial_trace: matrix is {}x{}, dims ({}, {}) require {}",
            m.rows(),
            m.cols(),
            da,
            db,
            da * db
        )));
    }
    Ok(match side {
        Side::A => CMatrix::from_fn(db, db, |k, l| (0..da).map(|i| m.at(i * db + k, i * db + l)).sum()),
        Side::B => CMatrix::from_fn(da, da, |i, j| (0..db).map(|k| m.at(i * db + k, j * db + k)).sum()),
    })
}

/// Hermitian eigendecomposition: ascending eigenvalues with orthonormal
/// eigenvector columns satisfying `A = Q Λ Q^dagger`.
#[derive(Clone, Debug)]
pub struct HermEig {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as matrix columns, aligned with `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl HermEig {
    /// Reassembles `Q Λ Q^dagger` (used by verification code and tests).
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        CMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| q.at(i, k) * cr(self.eigenvalues[k]) * q.at(j, k).conj()).sum()
        })
    }

    /// Smallest eigenvalue (0 for the empty matrix).
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Spectral projection onto the span of eigenvectors selected by `keep`.
    pub fn projection(&self, keep: impl Fn(f64) -> bool) -> CMatrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let sel: Vec<usize> = (0..n).filter(|&k| keep(self.eigenvalues[k])).collect();
        CMatrix::from_fn(n, n, |i, j| sel.iter().map(|&k| q.at(i, k) * q.at(j, k).conj()).sum())
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// The input must be Hermitian within `1e-9 · max(1, ‖a‖_F)`; the
/// computation then runs on the symmetrization `(a + a^dagger)/2`.
/// Deterministic: fixed sweep order, ascending eigenvalue sort, per-vector
/// phase fixed by making the largest-modulus component real positive, and
/// degenerate groups ordered by pivot index then lexicographically.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("herm_eig: {}x{} is not square", a.rows(), a.cols())));
    }
    let n = a.rows();
    let scale = a.norm();
    let tol = 1e-9 * scale.max(1.0);
    let res = a.herm_residual();
    if res > tol {
        return Err(Error::NotHermitian { residual: res, tol });
    }
    if n == 0 {
        return Ok(HermEig { eigenvalues: vec![], eigenvectors: CMatrix::zeros(0, 0) });
    }

    // Work on the symmetrized copy.
    let mut m = CMatrix::from_fn(n, n, |i, j| (a.at(i, j) + a.at(j, i).conj()) * cr(0.5));
    let mut v = CMatrix::identity(n);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m.at(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = m.at(p, q);
                let babs = b.norm();
                if babs <= 1e-300 {
                    continue;
                }
                // Phase factor making the off-diagonal entry real, then a
                // real Jacobi rotation on [[app, |b|], [|b|, aqq]].
                let u = b.conj() / cr(babs); // u = conj(b)/|b|
                let app = m.at(p, p).re;
                let aqq = m.at(q, q).re;
                let theta = (aqq - app) / (2.0 * babs);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let cth = 1.0 / (t * t + 1.0).sqrt();
                let sth = t * cth;
                // G = [[c, s],[−s·u, c·u]] acting on columns (p, q).
                let (cc, ss) = (cr(cth), cr(sth));
                let su = ss * u;
                let cu = cc * u;
                // Rows: (row_p, row_q) <- (c·row_p − conj(su)·row_q, s·row_p + conj(cu)·row_q)
                for j in 0..n {
                    let rp = m.at(p, j);
                    let rq = m.at(q, j);
                    m.set(p, j, cc * rp - su.conj() * rq);
                    m.set(q, j, ss * rp + cu.conj() * rq);
                }
                // Columns: (col_p, col_q) <- (c·col_p − su·col_q, s·col_p + cu·col_q)
                for i in 0..n {
                    let cp = m.at(i, p);
                    let cq = m.at(i, q);
                    m.set(i, p, cc * cp - su * cq);
                    m.set(i, q, ss * cp + cu * cq);
                    let vp = v.at(i, p);
                    let vq = v.at(i, q);
                    v.set(i, p, cc * vp - su * vq);
                    v.set(i, q, ss * vp + cu * vq);
                }
            }
        }
    }

    // Sort ascending; fix phases; order degenerate groups deterministically.
    let mut idx: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m.at(i, i).re).collect();
    idx.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());

    let mut cols: Vec<(f64, Vec<C64>)> = idx
        .into_iter()
        .map(|k| {
            let mut col: Vec<C64> = (0..n).map(|i| v.at(i, k)).collect();
            let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut col {
                *z = *z / cr(nrm);
            }
            // phase: largest-modulus component real positive
            let piv = pivot_index(&col);
            let ph = col[piv];
            if ph.norm() > 0.0 {
                let corr = ph.conj() / cr(ph.norm());
                for z in &mut col {
                    *z = *z * corr;
                }
            }
            (evals[k], col)
        })
        .collect();

    // Deterministic ordering within (numerically) degenerate groups.
    let deg_tol = 1e-8 * scale.max(1.0);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && cols[j + 1].0 - cols[i].0 <= deg_tol {
            j += 1;
        }
        if j > i {
            cols[i..=j].sort_by(|a, b| {
                let (pa, pb) = (pivot_index(&a.1), pivot_index(&b.1));
                pa.cmp(&pb).then_with(|| lex_cmp(&a.1, &b.1))
            });
        }
        i = j + 1;
    }

    let eigenvalues: Vec<f64> = cols.iter().map(|(l, _)| *l).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| cols[j].1[i]);
    Ok(HermEig { eigenvalues, eigenvectors })
}

fn pivot_index(col: &[C64]) -> usize {
    let mut best = 0;
    let mut bestv = -1.0;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > bestv + 1e-12 {
            bestv = m;
            best = i;
        }
    }
    best
}

fn lex_cmp(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.re.partial_cmp(&y.re).unwrap() {
            std::cmp::Ordering::Equal => {}
            o => return o,
        }
        match x.im.partial_cmp(&y.im).unwrap() {
            std::cmp::Ordering::Equal => {}
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Gram factorization of a positive semidefinite Hermitian matrix:
/// returns `G` with `m = G^dagger G`, rank-truncated by dropping rows for
/// eigenvalues below `tol·‖m‖_F` (clamped to zero). Fails with
/// [`Error::NotPsd`] carrying the most negative eigenvalue if any eigenvalue
/// is below `−tol·‖m‖_F`.
pub fn gram_factor(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = herm_eig(m)?;
    let scale = m.norm();
    let cut = tol * scale;
    let min = eig.min_eigenvalue();
    if min < -cut {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let n = m.rows();
    let kept: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > cut).collect();
    let mut g = CMatrix::zeros(kept.len(), n);
    for (r, &k) in kept.iter().enumerate() {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        for j in 0..n {
            g.set(r, j, cr(s) * eig.eigenvectors.at(j, k).conj());
        }
    }
    Ok(g)
}

/// Regularized polar part of a Hermitian matrix: the unitary `sign(t)` with
/// kernel eigenvalues (|λ| ≤ tol·‖t‖_F) mapped to +1. Commutes with `t`.
pub fn regularized_polar(t: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = herm_eig(t)?;
    let cut = tol * t.norm();
    let n = t.rows();
    let q = &eig.eigenvectors;
    let signs: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l.abs() <= cut { 1.0 } else { l.signum() })
        .collect();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| q.at(i, k) * cr(signs[k]) * q.at(j, k).conj()).sum()
    }))
}

/// Unitary polar factor of a (square, numerically full-rank) matrix:
/// `U = m·(m^dagger m)^{−1/2}`. Fails if the smallest singular value is
/// below `tol` times the largest (no canonical completion on the kernel).
pub fn polar_unitary(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension("polar_unitary: non-square input".into()));
    }
    let gram = m.dagger().mul(m);
    let eig = herm_eig(&gram)?;
    let smax = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let smin = eig.min_eigenvalue().max(0.0).sqrt();
    if smax == 0.0 || smin <= tol * smax {
        return Err(Error::Invalid(format!(
            "polar_unitary: rank-deficient input (σ_min {:.3e}, σ_max {:.3e})",
            smin, smax
        )));
    }
    let n = m.rows();
    let q = &eig.eigenvectors;
    // (m^dagger m)^{-1/2}
    let inv_sqrt = CMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| q.at(i, k) * cr(1.0 / eig.eigenvalues[k].max(1e-300).sqrt()) * q.at(j, k).conj())
            .sum()
    });
    Ok(m.mul(&inv_sqrt))
}

/// Orthonormal (Frobenius) basis of the commutant
/// `{X : Xg = gX and Xg^dagger = g^dagger X for all g ∈ gens}`,
/// computed as the null space of the stacked Sylvester maps `X ↦ Xg − gX`.
///
/// The null space is found by eigendecomposing the positive semidefinite
/// normal matrix `Σ K_g^dagger K_g`; going through the normal matrix squares
/// the singular values, so the membership threshold is floored at `1e-7`
/// relative (all algebras handled here have spectral gaps orders of
/// magnitude above the floor, and returned elements are re-certified by the
/// callers' commutation checks).
pub fn commutant_basis(gens: &[CMatrix], dim: usize, tol: f64) -> Result<Vec<CMatrix>> {
    for g in gens {
        if g.rows() != dim || g.cols() != dim {
            return Err(Error::Dimension(format!(
                "commutant_basis: generator is {}x{}, expected {}x{}",
                g.rows(),
                g.cols(),
                dim,
                dim
            )));
        }
    }
    let n2 = dim * dim;
    if gens.is_empty() {
        let mut basis = Vec::with_capacity(n2);
        for i in 0..dim {
            for j in 0..dim {
                let mut b = CMatrix::zeros(dim, dim);
                b.set(i, j, cr(1.0));
                basis.push(b);
            }
        }
        return Ok(basis);
    }

    // Normal matrix N = Σ_g K_g^dagger K_g with
    // K_g = I ⊗ g^T − g ⊗ I (row-major vec convention), over g and g^dagger.
    let mut nmat = CMatrix::zeros(n2, n2);
    let id = CMatrix::identity(dim);
    for g in gens {
        for gg in [g.clone(), g.dagger()] {
            let k = kron(&id, &gg.transpose()).sub(&kron(&gg, &id));
            let ktk = k.dagger().mul(&k);
            nmat = nmat.add(&ktk);
        }
    }
    let eig = herm_eig(&nmat)?;
    let lmax = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    // Singular-value threshold tol·σ_max floored at 1e-7 (see doc comment).
    // The scale itself is floored at Σ‖g‖²_F: when every generator commutes
    // with everything up to rounding (e.g. conjugated identities), the normal
    // matrix sits at the noise floor and a cut relative to its own largest
    // eigenvalue would threshold against noise, spuriously shrinking the
    // commutant.
    let scale = lmax.max(gens.iter().map(|g| g.norm() * g.norm()).sum());
    let sv_tol = tol.max(1e-7);
    let cut = sv_tol * sv_tol * scale;
    let mut basis = Vec::new();
    for k in 0..n2 {
        if eig.eigenvalues[k].max(0.0) <= cut {
            let col = eig.eigenvectors.column(k);
            basis.push(CMatrix::from_fn(dim, dim, |i, j| col.at(i * dim + j, 0)));
        }
    }
    Ok(basis)
}

/// Minimum eigenvalue of a Hermitian matrix (PSD certification helper).
pub fn min_eig(m: &CMatrix) -> Result<f64> {
    Ok(herm_eig(m)?.min_eigenvalue())
}

// ---------------------------------------------------------------------------
// Seeded random constructions (deterministic given the RNG state).
// ---------------------------------------------------------------------------

use rand::Rng;

/// Standard-normal sample via Box-Muller (keeps the dependency surface to
/// the `rand` core traits).
pub fn randn(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random matrix with i.i.d. complex Gaussian entries.
pub fn random_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(randn(rng), randn(rng)))
}

/// Random Hermitian matrix (Gaussian ensemble).
pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = random_gaussian(n, n, rng);
    g.add(&g.dagger()).scale(cr(0.5))
}

/// Haar-ish random unitary via Gram-Schmidt on a Gaussian matrix
/// (modified Gram-Schmidt with one re-orthogonalization pass).
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = random_gaussian(n, n, rng);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| g.at(i, j)).collect()).collect();
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let proj: C64 = cols[j]
                    .iter()
                    .zip(&cols[k])
                    .map(|(x, y)| y.conj() * x)
                    .sum();
                for i in 0..n {
                    let corr = proj * cols[k][i];
                    cols[j][i] -= corr;
                }
            }
        }
        let nrm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[j] {
            *z = *z / cr(nrm);
        }
    }
    CMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Random unit vector (column) of dimension `n`.
pub fn random_state(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = random_gaussian(n, 1, rng);
    let nrm = g.norm();
    g.scale(cr(1.0 / nrm))
}

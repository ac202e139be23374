//! Schur-multiplier channels from pairs of group representations.
//!
//! For a finite group `G`, unitary representations π on `C^dA` and ρ on
//! `C^dB`, and a unit vector ψ ∈ C^dA ⊗ C^dB, the table
//! `u(s,t) = ⟨(π(s) ⊗ ρ(t))ψ, ψ⟩` is a positive-definite function on
//! `G × G`. Schur multiplication by the |G|²×|G|² coefficient matrix
//! `c[(s,t),(s',t')] = u(s⁻¹s', t⁻¹t')` is then a unital, trace-preserving,
//! completely positive map Θ(u) — the Schur channel of the triple
//! `(π, ρ, ψ)`, built by [`schur_channel`].
//!
//! The same data generates a unitary stochastic operator model with blocks
//! `Ẽ_{s,s',g,g'} = δ_{s,g} δ_{s',g'} π(s⁻¹s')` ([`usom_model`]) whose
//! correlation reproduces `u` on the diagonally matched indices. When ψ is
//! marginally cyclic and the conjugated projectors
//! `(π(s) ⊗ ρ(t)) ψψ* (π(s) ⊗ ρ(t))†` span the full matrix space — the two
//! hypotheses decided by [`selftest_hypotheses`] — that model is a
//! self-test: every full-rank unitary model with the same correlation is a
//! local-unitary multiplicity extension of it, and [`schur_dilation`]
//! reconstructs the dilating unitaries explicitly.
//!
//! The worked example throughout is the symmetric group S₃ with its
//! two-dimensional irreducible representation on both legs ([`s3_irrep`])
//! and the rotated two-qubit state family [`rotated_psi`].

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dilation::{verify_local_dilation, DilationReport};
use crate::error::{Error, Result};
use crate::matcore::{
    c, commutant_basis, cr, herm_eig, kron, partial_trace, polar_unitary, CMatrix, Side, C64,
};
use crate::models::{
    decompose_algebra, factor_out_multiplicity, Checks, Flavor, MeasurementFamily, Model, Verdict,
};

// ---------------------------------------------------------------------------
// Groups and representations
// ---------------------------------------------------------------------------

/// A finite group presented by its multiplication table.
///
/// Elements are the opaque labels `0..order`. Construction verifies the
/// table exhaustively: entries in range, a two-sided identity, a two-sided
/// inverse for every element, and associativity over all |G|³ triples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    mul: Vec<Vec<usize>>,
    inv: Vec<usize>,
    identity: usize,
}

impl FiniteGroup {
    /// Builds a group from `mul[s][t] = st`, rejecting any table that is
    /// not a group.
    pub fn new(mul: Vec<Vec<usize>>) -> Result<Self> {
        let n = mul.len();
        if n == 0 || mul.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("group table must be square and nonempty".into()));
        }
        if mul.iter().flatten().any(|&v| v >= n) {
            return Err(Error::Invalid("group table entry out of range".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|s| mul[e][s] == s && mul[s][e] == s))
            .ok_or_else(|| Error::Invalid("group table has no identity".into()))?;
        let inv = (0..n)
            .map(|s| {
                (0..n)
                    .find(|&t| mul[s][t] == identity && mul[t][s] == identity)
                    .ok_or_else(|| Error::Invalid(format!("element {s} has no inverse")))
            })
            .collect::<Result<Vec<_>>>()?;
        for s in 0..n {
            for t in 0..n {
                for r in 0..n {
                    if mul[mul[s][t]][r] != mul[s][mul[t][r]] {
                        return Err(Error::Invalid(format!(
                            "associativity fails at ({s}, {t}, {r})"
                        )));
                    }
                }
            }
        }
        Ok(Self { mul, inv, identity })
    }

    pub fn order(&self) -> usize {
        self.mul.len()
    }

    /// Product `st`.
    pub fn mul(&self, s: usize, t: usize) -> usize {
        self.mul[s][t]
    }

    /// Inverse `s⁻¹`.
    pub fn inv(&self, s: usize) -> usize {
        self.inv[s]
    }

    /// Label of the identity element.
    pub fn identity(&self) -> usize {
        self.identity
    }
}

/// The symmetric group S₃ with elements ordered
/// `[e, (123), (132), (12), (23), (13)]` in cycle notation on `{1,2,3}`
/// and composition `(st)(x) = s(t(x))`.
pub fn s3() -> FiniteGroup {
    // Images of (1, 2, 3) under each permutation, in the fixed order above.
    const PERMS: [[usize; 3]; 6] =
        [[1, 2, 3], [2, 3, 1], [3, 1, 2], [2, 1, 3], [1, 3, 2], [3, 2, 1]];
    let apply = |p: usize, x: usize| PERMS[p][x - 1];
    let mul = (0..6)
        .map(|s| {
            (0..6)
                .map(|t| {
                    let im = [apply(s, apply(t, 1)), apply(s, apply(t, 2)), apply(s, apply(t, 3))];
                    PERMS.iter().position(|p| *p == im).expect("S3 is closed")
                })
                .collect()
        })
        .collect();
    FiniteGroup::new(mul).expect("S3 table is a group")
}

/// A finite-dimensional unitary representation: one matrix per element.
///
/// Construction checks shapes only; [`GroupRep::validate`] certifies the
/// numeric invariants (homomorphism property, unitarity, identity image).
#[derive(Clone, Debug)]
pub struct GroupRep {
    pub group: FiniteGroup,
    matrices: Vec<CMatrix>,
    dim: usize,
}

impl GroupRep {
    pub fn new(group: FiniteGroup, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != group.order() {
            return Err(Error::Dimension(format!(
                "{} matrices for a group of order {}",
                matrices.len(),
                group.order()
            )));
        }
        let dim = matrices[0].rows();
        if dim == 0 || matrices.iter().any(|m| m.rows() != dim || m.cols() != dim) {
            return Err(Error::Dimension(
                "representation matrices must be square of equal dimension".into(),
            ));
        }
        Ok(Self { group, matrices, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Image `π(s)`.
    pub fn matrix(&self, s: usize) -> &CMatrix {
        &self.matrices[s]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    /// Certifies `π(s)π(t) = π(st)` for all pairs, unitarity of every
    /// image, and `π(e) = I`.
    pub fn validate(&self, tol: f64) -> Verdict {
        let mut checks = Checks::default();
        let id = CMatrix::identity(self.dim);
        checks.push(
            "identity element image",
            self.matrices[self.group.identity()].dist(&id),
            tol,
        );
        for (s, m) in self.matrices.iter().enumerate() {
            checks.push(format!("unitarity of element {s}"), m.dagger().mul(m).dist(&id), tol);
        }
        let n = self.group.order();
        for s in 0..n {
            for t in 0..n {
                checks.push(
                    format!("homomorphism at ({s}, {t})"),
                    self.matrices[s].mul(&self.matrices[t]).dist(&self.matrices[self.group.mul(s, t)]),
                    tol,
                );
            }
        }
        checks.verdict()
    }

    pub fn require_valid(&self, tol: f64) -> Result<()> {
        self.validate(tol).into_result()
    }
}

/// The two-dimensional irreducible representation of [`s3`], fixed by
/// `π((123)) = diag(ω, ω̄)` with `ω = e^{2πi/3}` and `π((12))` the flip.
///
/// Certified at construction: homomorphism and unitarity residuals at
/// `1e-12`, and irreducibility through a one-dimensional commutant.
pub fn s3_irrep() -> GroupRep {
    let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let wb = w.conj();
    let o = c(0.0, 0.0);
    let l = cr(1.0);
    let mats = vec![
        CMatrix::identity(2),
        CMatrix::from_rows(&[vec![w, o], vec![o, wb]]).expect("shape"),
        CMatrix::from_rows(&[vec![wb, o], vec![o, w]]).expect("shape"),
        CMatrix::from_rows(&[vec![o, l], vec![l, o]]).expect("shape"),
        CMatrix::from_rows(&[vec![o, wb], vec![w, o]]).expect("shape"),
        CMatrix::from_rows(&[vec![o, w], vec![wb, o]]).expect("shape"),
    ];
    let rep = GroupRep::new(s3(), mats).expect("shape");
    rep.require_valid(1e-12).expect("canonical S3 irrep is exact");
    let comm = commutant_basis(rep.matrices(), 2, 1e-9).expect("commutant solve");
    assert_eq!(comm.len(), 1, "canonical S3 irrep has scalar commutant");
    rep
}

/// The unit vector `α e_θ⊗e_θ + β f_θ⊗f_θ` in `C² ⊗ C²`, where
/// `{e_θ, f_θ}` is the standard basis rotated by `θ/2`:
/// `e_θ = (cos θ/2, sin θ/2)`, `f_θ = (−sin θ/2, cos θ/2)`.
///
/// The Schmidt coefficients are `(|α|, |β|)`; the weights must satisfy
/// `|α|² + |β|² = 1`.
pub fn rotated_psi(theta: f64, alpha: C64, beta: C64) -> Result<CMatrix> {
    let gap = (alpha.norm_sqr() + beta.norm_sqr() - 1.0).abs();
    if gap > crate::DEFAULT_TOL {
        return Err(Error::Violation {
            description: "state weights are not normalized".into(),
            magnitude: gap,
        });
    }
    let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = [cr(ct), cr(st)];
    let f = [cr(-st), cr(ct)];
    let mut v = vec![c(0.0, 0.0); 4];
    for i in 0..2 {
        for j in 0..2 {
            v[i * 2 + j] = alpha * e[i] * e[j] + beta * f[i] * f[j];
        }
    }
    Ok(CMatrix::col_vec(&v))
}

// ---------------------------------------------------------------------------
// The Schur channel
// ---------------------------------------------------------------------------

/// Shared preconditions of every construction taking `(π, ρ, ψ)`: both
/// representations valid over the same group, ψ of matching product
/// dimension and unit norm.
fn require_ideal_data(pi_a: &GroupRep, pi_b: &GroupRep, psi: &CMatrix) -> Result<()> {
    if pi_a.group != pi_b.group {
        return Err(Error::Invalid("representations act for different groups".into()));
    }
    pi_a.require_valid(crate::DEFAULT_TOL)?;
    pi_b.require_valid(crate::DEFAULT_TOL)?;
    if psi.cols() != 1 || psi.rows() != pi_a.dim() * pi_b.dim() {
        return Err(Error::Dimension(format!(
            "state has shape {}x{}, expected {}x1",
            psi.rows(),
            psi.cols(),
            pi_a.dim() * pi_b.dim()
        )));
    }
    let gap = (psi.norm() - 1.0).abs();
    if gap > crate::DEFAULT_TOL {
        return Err(Error::Violation {
            description: "state is not a unit vector".into(),
            magnitude: gap,
        });
    }
    Ok(())
}

/// `u[s][t] = ⟨(π(s) ⊗ ρ(t))ψ, ψ⟩`.
fn u_table(pi_a: &GroupRep, pi_b: &GroupRep, psi: &CMatrix) -> Vec<Vec<C64>> {
    let n = pi_a.group.order();
    (0..n)
        .map(|s| {
            (0..n)
                .map(|t| kron(pi_a.matrix(s), pi_b.matrix(t)).mul(psi).inner(psi))
                .collect()
        })
        .collect()
}

/// A Schur channel: the positive-definite table `u`, the generating state,
/// and the Choi matrix of the multiplier `Θ(u): M ↦ c ∘ M` on the
/// |G|²-dimensional input space indexed by pairs `(s, t)`.
#[derive(Clone, Debug)]
pub struct SchurData {
    pub group: FiniteGroup,
    /// `u[s][t] = ⟨(π(s) ⊗ ρ(t))ψ, ψ⟩`.
    pub u: Vec<Vec<C64>>,
    /// The generating unit vector.
    pub psi: CMatrix,
    /// Choi matrix of `Θ(u)`: nonzero only on the matrix-unit pattern,
    /// `C[(i,i),(j,j)] = c[i][j]` for the coefficient matrix `c`.
    pub choi: CMatrix,
}

impl SchurData {
    /// The |G|²×|G|² Schur-multiplier coefficient matrix
    /// `c[(s,t),(s',t')] = u(s⁻¹s', t⁻¹t')` with row index `s·|G| + t`.
    pub fn coefficient_matrix(&self) -> CMatrix {
        let n = self.group.order();
        CMatrix::from_fn(n * n, n * n, |r, q| {
            let (s, t) = (r / n, r % n);
            let (sp, tp) = (q / n, q % n);
            self.u[self.group.mul(self.group.inv(s), sp)][self.group.mul(self.group.inv(t), tp)]
        })
    }

    /// Applies the channel: the entrywise product of the coefficient
    /// matrix with `m`.
    pub fn apply(&self, m: &CMatrix) -> Result<CMatrix> {
        let n2 = self.group.order() * self.group.order();
        if m.rows() != n2 || m.cols() != n2 {
            return Err(Error::Dimension(format!(
                "channel input is {}x{}, expected {n2}x{n2}",
                m.rows(),
                m.cols()
            )));
        }
        let coeff = self.coefficient_matrix();
        Ok(CMatrix::from_fn(n2, n2, |i, j| coeff.at(i, j) * m.at(i, j)))
    }

    /// Certifies every structural invariant: `u(e,e) = 1`, unit state,
    /// positive definiteness of `u` (the coefficient matrix is Hermitian
    /// PSD), unitality and trace preservation (`diag c = 1`), and the Choi
    /// pattern. The Choi matrix is permutation-similar to `c ⊕ 0`, so its
    /// positivity is certified on the embedded coefficient block.
    pub fn validate(&self, tol: f64) -> Result<Verdict> {
        let n = self.group.order();
        let n2 = n * n;
        if self.u.len() != n || self.u.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("u table shape does not match the group order".into()));
        }
        if self.choi.rows() != n2 * n2 || self.choi.cols() != n2 * n2 {
            return Err(Error::Dimension(format!(
                "Choi matrix is {}x{}, expected {}x{}",
                self.choi.rows(),
                self.choi.cols(),
                n2 * n2,
                n2 * n2
            )));
        }
        let mut checks = Checks::default();
        let e = self.group.identity();
        checks.push("normalization u(e,e)", (self.u[e][e] - cr(1.0)).norm(), tol);
        checks.push("state norm", (self.psi.norm() - 1.0).abs(), tol);
        let coeff = self.coefficient_matrix();
        checks.push("coefficient matrix hermitian", coeff.herm_residual(), tol);
        let sym = coeff.add(&coeff.dagger()).scale(cr(0.5));
        let min = herm_eig(&sym)?.min_eigenvalue();
        checks.push("positive definiteness", (-min).max(0.0), tol);
        let unital =
            (0..n2).map(|i| (coeff.at(i, i) - cr(1.0)).norm()).fold(0.0f64, f64::max);
        checks.push("unitality and trace preservation", unital, tol);
        let mut pattern = 0.0f64;
        for r in 0..n2 * n2 {
            let (i, k) = (r / n2, r % n2);
            for col in 0..n2 * n2 {
                let (j, l) = (col / n2, col % n2);
                let expect = if k == i && l == j { coeff.at(i, j) } else { c(0.0, 0.0) };
                pattern = pattern.max((self.choi.at(r, col) - expect).norm());
            }
        }
        checks.push("Choi matrix-unit pattern", pattern, tol);
        Ok(checks.verdict())
    }
}

/// Builds the Schur channel of `(pi_a, pi_b, psi)`: the table
/// `u(s,t) = ⟨(π(s) ⊗ ρ(t))ψ, ψ⟩` and the Choi matrix of entrywise
/// multiplication by `c[(s,t),(s',t')] = u(s⁻¹s', t⁻¹t')` on matrix units
/// `e_{s,s'} ⊗ e_{t,t'}`. All [`SchurData`] invariants are certified at
/// [`DEFAULT_TOL`](crate::DEFAULT_TOL) before returning; positive
/// definiteness of `u` makes the channel unital and completely positive
/// for every valid input.
pub fn schur_channel(pi_a: &GroupRep, pi_b: &GroupRep, psi: &CMatrix) -> Result<SchurData> {
    require_ideal_data(pi_a, pi_b, psi)?;
    let group = pi_a.group.clone();
    let u = u_table(pi_a, pi_b, psi);
    let n = group.order();
    let n2 = n * n;
    let mut choi = CMatrix::zeros(n2 * n2, n2 * n2);
    for r in 0..n2 {
        let (s, t) = (r / n, r % n);
        for q in 0..n2 {
            let (sp, tp) = (q / n, q % n);
            let v = u[group.mul(group.inv(s), sp)][group.mul(group.inv(t), tp)];
            choi.set(r * n2 + r, q * n2 + q, v);
        }
    }
    let data = SchurData { group, u, psi: psi.clone(), choi };
    data.validate(crate::DEFAULT_TOL)?.into_result()?;
    Ok(data)
}

// ---------------------------------------------------------------------------
// Self-test hypotheses
// ---------------------------------------------------------------------------

/// Outcome of the self-test hypothesis checks for a triple `(π, ρ, ψ)`.
#[derive(Clone, Copy, Debug)]
pub struct SelftestHypotheses {
    /// ψ is marginally cyclic: square marginals (`dimA = dimB`) of full
    /// Schmidt rank.
    pub marginally_cyclic: bool,
    /// Dimension of the span of the |G|² conjugated projectors
    /// `(π(s) ⊗ ρ(t)) ψψ* (π(s) ⊗ ρ(t))†`.
    pub extremality_rank: usize,
    /// True iff the rank is the full `(dimA·dimB)²` and ψ is marginally
    /// cyclic — the hypotheses under which [`schur_dilation`] succeeds on
    /// every full-rank unitary model with the same correlation.
    pub verdict: bool,
}

/// Decides the two self-testing hypotheses numerically.
///
/// The Schmidt rank is the rank of the reduced density on the first leg;
/// the extremality rank is the rank of the Gram matrix of the vectorized
/// conjugated projectors. Both use the relative threshold
/// `tol · (largest eigenvalue)`.
pub fn selftest_hypotheses(
    pi_a: &GroupRep,
    pi_b: &GroupRep,
    psi: &CMatrix,
    tol: f64,
) -> Result<SelftestHypotheses> {
    require_ideal_data(pi_a, pi_b, psi)?;
    let (da, db) = (pi_a.dim(), pi_b.dim());
    let rho = psi.mul(&psi.dagger());
    let red = partial_trace(&rho, (da, db), Side::B)?;
    let eig = herm_eig(&red)?;
    let top = eig.eigenvalues[da - 1].max(0.0);
    let schmidt_rank = eig.eigenvalues.iter().filter(|&&v| v > tol * top).count();
    let marginally_cyclic = da == db && schmidt_rank == da;

    let n = pi_a.group.order();
    let mut conj = Vec::with_capacity(n * n);
    for s in 0..n {
        for t in 0..n {
            let w = kron(pi_a.matrix(s), pi_b.matrix(t));
            conj.push(w.mul(&rho).mul(&w.dagger()));
        }
    }
    let gram = CMatrix::from_fn(n * n, n * n, |p, q| conj[p].inner(&conj[q]));
    let geig = herm_eig(&gram)?;
    let gtop = geig.eigenvalues[n * n - 1].max(0.0);
    let extremality_rank = geig.eigenvalues.iter().filter(|&&v| v > tol * gtop).count();
    let verdict = marginally_cyclic && extremality_rank == (da * db) * (da * db);
    Ok(SelftestHypotheses { marginally_cyclic, extremality_rank, verdict })
}

// ---------------------------------------------------------------------------
// The unitary model and its dilation
// ---------------------------------------------------------------------------

/// The family `Ẽ_{s,s',g,g'} = δ_{s,g} δ_{s',g'} π(s⁻¹s')`.
fn delta_family(rep: &GroupRep) -> Result<MeasurementFamily> {
    let n = rep.group.order();
    let d = rep.dim();
    let zero = CMatrix::zeros(d, d);
    let blocks = (0..n)
        .map(|s| {
            (0..n)
                .map(|sp| {
                    (0..n)
                        .map(|g| {
                            (0..n)
                                .map(|gp| {
                                    if (g, gp) == (s, sp) {
                                        rep.matrix(rep.group.mul(rep.group.inv(s), sp)).clone()
                                    } else {
                                        zero.clone()
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    MeasurementFamily::usom(blocks)
}

/// The unitary stochastic-operator model generated by `(pi_a, pi_b, psi)`:
/// Alice blocks `Ẽ_{s,s',g,g'} = δ_{s,g} δ_{s',g'} π(s⁻¹s')`, the mirror
/// family with ρ for Bob, and joint state ψ on the tensor split. Validity
/// of both families is certified at [`DEFAULT_TOL`](crate::DEFAULT_TOL).
///
/// The correlation of the model reproduces the channel table on the
/// diagonally matched indices,
/// `Γ(s,s',t,t' | s,s',t,t') = u(s⁻¹s', t⁻¹t')`, and vanishes identically
/// off that support.
pub fn usom_model(pi_a: &GroupRep, pi_b: &GroupRep, psi: &CMatrix) -> Result<Model> {
    require_ideal_data(pi_a, pi_b, psi)?;
    let m = Model::new(
        Flavor::TensorSplit { dim_a: pi_a.dim(), dim_b: pi_b.dim() },
        delta_family(pi_a)?,
        delta_family(pi_b)?,
        psi.clone(),
    )?;
    m.require_valid(crate::DEFAULT_TOL)?;
    Ok(m)
}

/// Extracts the diagonal blocks `W[s][s'] = E_{s,s',s,s'}` of a family
/// after certifying diagonality (`E_{s,s',g,g'} = 0 unless
/// `(g,g') = (s,s')`) and unitarity of every diagonal block.
fn diagonal_units(
    fam: &MeasurementFamily,
    name: &str,
    n: usize,
    tol: f64,
) -> Result<Vec<Vec<CMatrix>>> {
    if fam.kind().is_flat() {
        return Err(Error::Invalid(format!(
            "{name} family is not a stochastic operator matrix"
        )));
    }
    if fam.x_count() != n || fam.a_count() != n {
        return Err(Error::Dimension(format!(
            "{name} family has shape ({}, {}), expected ({n}, {n}) for the group",
            fam.x_count(),
            fam.a_count()
        )));
    }
    let id = CMatrix::identity(fam.h());
    let mut units = Vec::with_capacity(n);
    for s in 0..n {
        let mut row = Vec::with_capacity(n);
        for sp in 0..n {
            for g in 0..n {
                for gp in 0..n {
                    if (g, gp) == (s, sp) {
                        continue;
                    }
                    let off = fam.som_block(s, sp, g, gp).norm();
                    if off > tol {
                        return Err(Error::Violation {
                            description: format!(
                                "{name} family is not diagonal: block ({s},{sp},{g},{gp}) is nonzero"
                            ),
                            magnitude: off,
                        });
                    }
                }
            }
            let w = fam.som_block(s, sp, s, sp).clone();
            let gap = w.dagger().mul(&w).dist(&id).max(w.mul(&w.dagger()).dist(&id));
            if gap > tol {
                return Err(Error::Violation {
                    description: format!("{name} family diagonal block ({s},{sp}) is not unitary"),
                    magnitude: gap,
                });
            }
            row.push(w);
        }
        units.push(row);
    }
    Ok(units)
}

/// First unitary solution of `X·a[s] = b[s]·X` for all `s`, or `None` when
/// the joint null space is trivial. The null space is located through the
/// normal matrix of the stacked Sylvester maps, so the detection threshold
/// is floored at `1e-7` relative, matching
/// [`commutant_basis`](crate::matcore::commutant_basis).
fn intertwiner(a: &[CMatrix], b: &[CMatrix], d: usize, tol: f64) -> Result<Option<CMatrix>> {
    let id = CMatrix::identity(d);
    let mut normal = CMatrix::zeros(d * d, d * d);
    for (x, y) in a.iter().zip(b) {
        let k = kron(&id, &x.transpose()).sub(&kron(y, &id));
        normal = normal.add(&k.dagger().mul(&k));
    }
    let eig = herm_eig(&normal)?;
    let cut = tol.max(1e-7) * eig.eigenvalues[d * d - 1].max(1.0);
    if eig.eigenvalues[0] > cut {
        return Ok(None);
    }
    let v = eig.eigenvectors.column(0);
    let w = CMatrix::from_fn(d, d, |i, j| v.at(i * d + j, 0));
    Ok(Some(polar_unitary(&w, 1e-6)?))
}

/// Decomposes the algebra generated by the normalized units into
/// multiplicity blocks `π_i ⊗ I_{m_i}`, intertwines every block with the
/// target representation, and assembles the local unitary
/// `T: C^dim → C^d ⊗ C^M` with rows indexed `a·M + t`.
fn recover_side(
    units: &[CMatrix],
    target: &GroupRep,
    dim: usize,
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> Result<CMatrix> {
    let d = target.dim();
    let comps = decompose_algebra(units, dim, rng, tol)?;
    let total: usize = comps.iter().map(|c| c.multiplicity).sum();
    if comps.iter().any(|c| c.irrep_dim != d) || d * total != dim {
        return Err(Error::NotEquivalent(format!(
            "algebra components {:?} do not match the target representation dimension {d}",
            comps.iter().map(|c| (c.irrep_dim, c.multiplicity)).collect::<Vec<_>>()
        )));
    }
    let mut t_mat = CMatrix::zeros(dim, dim);
    let mut off = 0;
    for (idx, comp) in comps.iter().enumerate() {
        let mi = comp.multiplicity;
        let mut local = Vec::with_capacity(units.len());
        let mut resid = 0.0f64;
        for u in units {
            let blk = comp.q.dagger().mul(u).mul(&comp.q);
            let (pi, r) = factor_out_multiplicity(&blk, d, mi);
            resid = resid.max(r);
            local.push(pi);
        }
        if resid > 100.0 * tol * (dim as f64) {
            return Err(Error::Violation {
                description: format!("component {idx} is not a multiplicity block"),
                magnitude: resid,
            });
        }
        let w = intertwiner(&local, target.matrices(), d, tol)?.ok_or_else(|| {
            Error::NotEquivalent(format!(
                "component {idx} carries a representation inequivalent to the target"
            ))
        })?;
        let block = kron(&w, &CMatrix::identity(mi)).mul(&comp.q.dagger());
        for a in 0..d {
            for t in 0..mi {
                for j in 0..dim {
                    t_mat.set(a * total + off + t, j, block.at(a * mi + t, j));
                }
            }
        }
        off += mi;
    }
    Ok(t_mat)
}

/// Reconstructs the local dilation exhibiting `m` as a multiplicity
/// extension of the ideal unitary model of `(pi_a, pi_b, psi)`, with
/// seed 0 for the randomized algebra decomposition.
///
/// The input must be a full-rank unitary model with the ideal correlation:
/// a tensor-split model whose families are diagonal stochastic operator
/// matrices with unitary diagonal blocks `W[s][s'] = U_s†U_s'`, whose
/// reduced states on both legs are full rank, and whose pair expectations
/// on the diagonal support equal `u(s⁻¹s', t⁻¹t')` within `tol`. The
/// normalization `U_e = I` is applied automatically by working with the
/// generators `U_e†U_s = W[e][s]`, which leaves every block unchanged.
///
/// The recovery decomposes the algebra generated by `{U_e†U_s}` into
/// multiplicity blocks, solves the intertwiner system
/// `X·(recovered block) = (target block)·X` on each, assembles the local
/// unitaries `T_A, T_B`, and returns the [`verify_local_dilation`] report
/// against [`usom_model`]. Violated preconditions surface as
/// [`Error::Violation`] naming the offending block; a component
/// inequivalent to the target representation surfaces as
/// [`Error::NotEquivalent`].
pub fn schur_dilation(
    m: &Model,
    pi_a: &GroupRep,
    pi_b: &GroupRep,
    psi: &CMatrix,
    tol: f64,
) -> Result<DilationReport> {
    schur_dilation_seeded(m, pi_a, pi_b, psi, tol, 0)
}

/// [`schur_dilation`] with an explicit seed for the randomized algebra
/// decomposition.
pub fn schur_dilation_seeded(
    m: &Model,
    pi_a: &GroupRep,
    pi_b: &GroupRep,
    psi: &CMatrix,
    tol: f64,
    seed: u64,
) -> Result<DilationReport> {
    require_ideal_data(pi_a, pi_b, psi)?;
    m.require_valid(tol)?;
    let Flavor::TensorSplit { dim_a: da, dim_b: db } = m.flavor else {
        return Err(Error::Invalid("dilation recovery expects a tensor-split model".into()));
    };
    let group = &pi_a.group;
    let n = group.order();
    let units_a = diagonal_units(&m.alice, "alice", n, tol)?;
    let units_b = diagonal_units(&m.bob, "bob", n, tol)?;

    let rho = m.state.mul(&m.state.dagger());
    for (name, side) in [("alice", Side::B), ("bob", Side::A)] {
        let red = partial_trace(&rho, (da, db), side)?;
        let min = herm_eig(&red)?.min_eigenvalue();
        if min <= tol {
            return Err(Error::Violation {
                description: format!(
                    "reduced state on the {name} leg is not full rank (minimum eigenvalue {min:.3e})"
                ),
                magnitude: min.abs(),
            });
        }
    }

    let u = u_table(pi_a, pi_b, psi);
    let mut worst = ((0, 0, 0, 0), 0.0f64);
    for s in 0..n {
        for sp in 0..n {
            for t in 0..n {
                for tp in 0..n {
                    let got = m.pair_expectation(&units_a[s][sp], &units_b[t][tp]);
                    let want = u[group.mul(group.inv(s), sp)][group.mul(group.inv(t), tp)];
                    let gap = (got - want).norm();
                    if gap > worst.1 {
                        worst = ((s, sp, t, tp), gap);
                    }
                }
            }
        }
    }
    if worst.1 > tol {
        let ((s, sp, t, tp), gap) = worst;
        return Err(Error::Violation {
            description: format!(
                "model correlation differs from the ideal at (s,s',t,t') = ({s},{sp},{t},{tp})"
            ),
            magnitude: gap,
        });
    }

    let e = group.identity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_a = recover_side(&units_a[e], pi_a, da, &mut rng, tol)?;
    let t_b = recover_side(&units_b[e], pi_b, db, &mut rng, tol)?;
    let ideal = usom_model(pi_a, pi_b, psi)?;
    verify_local_dilation(m, &ideal, &t_a, &t_b, tol)
}

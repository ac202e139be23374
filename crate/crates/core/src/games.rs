//! The quantum graph-coloring game Hom(K₄, Q₂) and contextuality scenarios.
//!
//! A quantum 4-coloring of the complete graph K₄ by the quantum set Q₂ is a
//! family of 2×2 matrix-unit systems `e_{x,a,a'}`, one per vertex `x`, that
//! are mutually orthogonal across vertices: `Σ_{a,b} e_{x,a,b}e_{y,b,a} = 0`
//! for `x ≠ y`. Together with a tracial state τ this produces the perfect
//! coloring correlation `Γ(ε_{x,x}⊗ε_{y,y}) = Σ τ(e_{x,a,a'}e_{y,b',b})
//! ε_{a,a'}⊗ε_{b,b'}`, whose diagonal blocks equal the maximally entangled
//! projector and whose off-diagonal blocks are supported in Q₂.
//!
//! The canonical model conjugates the standard matrix units by the Pauli
//! unitary error basis `U₁ = I, U₂ = σx, U₃ = σz, U₄ = σy`, and every
//! faithful finite-dimensional model with the same correlation is of this
//! form up to a unitary and an ampliation. [`extract_pauli_form`] makes that
//! rigidity constructive: it builds the reducing unitary explicitly and
//! reports the residuals of the recovered structure.
//!
//! The second half of the module handles contextuality scenarios: finite
//! hypergraphs whose probabilistic assignments normalize over every edge,
//! products of scenarios, and the no-signalling equalities that single out
//! consistent joint assignments. Bell scenarios and odd-cycle scenarios are
//! provided as ready-made constructors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::{
    c, cr, herm_eig, kron, polar_unitary, random_gaussian, C64, CMatrix,
};
use crate::models::{Checks, CqnsCorrelation, Verdict};

/// Number of vertices of K₄ (and of matrix-unit systems in a model).
pub const VERTEX_COUNT: usize = 4;

/// Outcome dimension of the quantum set Q₂. The rigidity argument is
/// specific to two outcomes (the Pauli case), so the module does not
/// pretend generality in `d`.
pub const OUTCOME_DIM: usize = 2;

fn sigma_x() -> CMatrix {
    CMatrix::from_rows(&[vec![cr(0.0), cr(1.0)], vec![cr(1.0), cr(0.0)]]).expect("shape")
}

fn sigma_y() -> CMatrix {
    CMatrix::from_rows(&[vec![cr(0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), cr(0.0)]]).expect("shape")
}

fn sigma_z() -> CMatrix {
    CMatrix::from_rows(&[vec![cr(1.0), cr(0.0)], vec![cr(0.0), cr(-1.0)]]).expect("shape")
}

/// The Pauli unitary error basis in the fixed order `I, σx, σz, σy`.
fn pauli_units() -> [CMatrix; 4] {
    [CMatrix::identity(2), sigma_x(), sigma_z(), sigma_y()]
}

/// Standard 2×2 matrix unit `ε_{a,a'}`.
fn matrix_unit(a: usize, ap: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m.set(a, ap, cr(1.0));
    m
}

/// `tr(a·b)` without forming the product.
fn trace_prod(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.rows();
    let mut s = cr(0.0);
    for i in 0..n {
        for j in 0..a.cols() {
            s += a.at(i, j) * b.at(j, i);
        }
    }
    s
}

/// The maximally entangled projector `Ω_d Ω_d†` on `C^d ⊗ C^d`, with row
/// index `a·d + b`.
fn max_entangled_projector(d: usize) -> CMatrix {
    CMatrix::from_fn(d * d, d * d, |r, c_| {
        if r / d == r % d && c_ / d == c_ % d {
            cr(1.0 / d as f64)
        } else {
            cr(0.0)
        }
    })
}

/// A quantum 4-coloring model: four 2×2 matrix-unit systems on a common
/// Hilbert space, mutually orthogonal across vertices, together with a
/// density matrix inducing a tracial state on the generated algebra.
#[derive(Clone, Debug)]
pub struct HomModel {
    /// Matrix units `e_{x,a,a'}` indexed `units[x][a][a']` with
    /// `x < 4` and `a, a' < 2`; all matrices share one dimension.
    pub units: Vec<Vec<Vec<CMatrix>>>,
    /// Density matrix `ρ` defining `τ(m) = tr(ρ·m)`.
    pub trace_state: CMatrix,
}

impl HomModel {
    /// Builds a model after checking shapes: exactly four 2×2 systems of
    /// square matrices whose dimension matches the trace state.
    pub fn new(units: Vec<Vec<Vec<CMatrix>>>, trace_state: CMatrix) -> Result<Self> {
        let m = Self { units, trace_state };
        m.require_shape()?;
        Ok(m)
    }

    fn require_shape(&self) -> Result<()> {
        let d = self.trace_state.rows();
        if !self.trace_state.is_square() {
            return Err(Error::Dimension("trace state must be square".into()));
        }
        if self.units.len() != VERTEX_COUNT {
            return Err(Error::Dimension(format!(
                "coloring model needs {} matrix-unit systems, got {}",
                VERTEX_COUNT,
                self.units.len()
            )));
        }
        for per_x in &self.units {
            if per_x.len() != OUTCOME_DIM || per_x.iter().any(|row| row.len() != OUTCOME_DIM) {
                return Err(Error::Dimension(
                    "each matrix-unit system must be a 2x2 family".into(),
                ));
            }
            for row in per_x {
                for e in row {
                    if e.rows() != d || e.cols() != d {
                        return Err(Error::Dimension(format!(
                            "matrix unit is {}x{}, trace state is {d}x{d}",
                            e.rows(),
                            e.cols()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Hilbert-space dimension the model acts on.
    pub fn dim(&self) -> usize {
        self.trace_state.rows()
    }

    /// The state `τ(m) = tr(ρ·m)`.
    pub fn tau(&self, m: &CMatrix) -> C64 {
        trace_prod(&self.trace_state, m)
    }

    /// Checks every model invariant and reports the worst offender:
    ///
    /// - per vertex, the matrix-unit relations
    ///   `e_{x,a,a'}e_{x,b',b} = δ_{a',b'}e_{x,a,b}` and `Σ_a e_{x,a,a} = I`;
    /// - cross-vertex orthogonality `Σ_{a,b} e_{x,a,b}e_{y,b,a} = 0`;
    /// - the trace state is a density matrix and τ is tracial on the
    ///   generated algebra (cyclicity is certified on all words of length
    ///   at most three in the generators).
    pub fn validate(&self, tol: f64) -> Result<Verdict> {
        self.require_shape()?;
        let d = self.dim();
        let id = CMatrix::identity(d);
        let scale = self
            .units
            .iter()
            .flatten()
            .flatten()
            .map(|e| e.norm())
            .fold(1.0f64, f64::max);
        let cut = tol * scale * scale;
        let mut checks = Checks::default();

        for (x, per_x) in self.units.iter().enumerate() {
            for a in 0..OUTCOME_DIM {
                for ap in 0..OUTCOME_DIM {
                    for bp in 0..OUTCOME_DIM {
                        for b in 0..OUTCOME_DIM {
                            let lhs = per_x[a][ap].mul(&per_x[bp][b]);
                            let rhs = if ap == bp {
                                per_x[a][b].clone()
                            } else {
                                CMatrix::zeros(d, d)
                            };
                            checks.push(
                                format!("matrix-unit product x={x} ({a}{ap})({bp}{b})"),
                                lhs.sub(&rhs).norm(),
                                cut,
                            );
                        }
                    }
                }
            }
            let total = per_x[0][0].add(&per_x[1][1]);
            checks.push(format!("unit decomposition at x={x}"), total.sub(&id).norm(), cut);
        }

        for x in 0..VERTEX_COUNT {
            for y in (x + 1)..VERTEX_COUNT {
                let mut s = CMatrix::zeros(d, d);
                for a in 0..OUTCOME_DIM {
                    for b in 0..OUTCOME_DIM {
                        s = s.add(&self.units[x][a][b].mul(&self.units[y][b][a]));
                    }
                }
                checks.push(format!("vertex orthogonality ({x},{y})"), s.norm(), cut);
            }
        }

        let rho = &self.trace_state;
        let rho_cut = tol * rho.norm().max(1.0);
        checks.push("trace state hermitian", rho.herm_residual(), rho_cut);
        checks.push("trace state unit trace", (rho.trace() - cr(1.0)).norm(), rho_cut);
        if rho.herm_residual() <= rho_cut {
            let sym = rho.add(&rho.dagger()).scale(cr(0.5));
            let min = herm_eig(&sym)?.min_eigenvalue();
            checks.push("trace state positive", (-min).max(0.0), rho_cut);
        }

        // Traciality certificate: τ is cyclic on all words of length ≤ 3.
        let flat: Vec<&CMatrix> = self.units.iter().flatten().flatten().collect();
        let rho_u: Vec<CMatrix> = flat.iter().map(|u| rho.mul(u)).collect();
        let mut pairs = Vec::with_capacity(flat.len() * flat.len());
        for u in &flat {
            for v in &flat {
                pairs.push(u.mul(v));
            }
        }
        let rho_pairs: Vec<CMatrix> = pairs.iter().map(|p| rho.mul(p)).collect();
        let tau_cut = tol * scale * scale * scale * rho.norm().max(1.0);
        for (i, _) in flat.iter().enumerate() {
            for (j, v) in flat.iter().enumerate() {
                let fwd = trace_prod(&rho_u[i], v);
                let bwd = trace_prod(&rho_u[j], flat[i]);
                checks.push(format!("tracial pair ({i},{j})"), (fwd - bwd).norm(), tau_cut);
            }
        }
        for (i, u) in flat.iter().enumerate() {
            for jk in 0..pairs.len() {
                let fwd = trace_prod(&rho_u[i], &pairs[jk]);
                let bwd = trace_prod(&rho_pairs[jk], u);
                checks.push(
                    format!("tracial triple ({i},{jk})"),
                    (fwd - bwd).norm(),
                    tau_cut,
                );
            }
        }
        Ok(checks.verdict())
    }
}

/// The canonical Pauli coloring model: `e_{x,a,a'} = U_x†ε_{a,a'}U_x` for
/// the unitary error basis `U₁ = I, U₂ = σx, U₃ = σz, U₄ = σy`, with the
/// normalized trace `τ = tr/2` as trace state.
///
/// Construction is exact, and the invariants — including the
/// unitary-error-basis property `tr(U_xU_y†)/2 = δ_{x,y}` that drives
/// cross-vertex orthogonality — are re-certified at `1e-14` on every call.
pub fn pauli_hom_model() -> HomModel {
    let us = pauli_units();
    let units: Vec<Vec<Vec<CMatrix>>> = us
        .iter()
        .map(|u| {
            (0..OUTCOME_DIM)
                .map(|a| {
                    (0..OUTCOME_DIM)
                        .map(|ap| u.dagger().mul(&matrix_unit(a, ap)).mul(u))
                        .collect()
                })
                .collect()
        })
        .collect();
    let m = HomModel::new(units, CMatrix::identity(2).scale(cr(0.5))).expect("fixed shape");
    let verdict = m.validate(1e-14).expect("2x2 eigensolve");
    assert!(verdict.is_valid(), "Pauli model invariants are exact: {verdict:?}");
    for (x, ux) in us.iter().enumerate() {
        for (y, uy) in us.iter().enumerate() {
            let overlap = trace_prod(ux, &uy.dagger()) / cr(2.0);
            let target = if x == y { cr(1.0) } else { cr(0.0) };
            assert!(
                (overlap - target).norm() <= 1e-14,
                "Pauli trace orthogonality is exact"
            );
        }
    }
    m
}

/// The coloring correlation of a model:
/// `Γ(ε_{x,x}⊗ε_{y,y}) = Σ_{a,a',b,b'} τ(e_{x,a,a'}e_{y,b',b})
/// ε_{a,a'}⊗ε_{b,b'}`, returned as a classical-input quantum
/// no-signalling correlation over four inputs per side.
pub fn gamma_correlation(m: &HomModel) -> Result<CqnsCorrelation> {
    m.validate(crate::DEFAULT_TOL)?.into_result()?;
    let rho_e: Vec<Vec<Vec<CMatrix>>> = m
        .units
        .iter()
        .map(|per_x| {
            per_x
                .iter()
                .map(|row| row.iter().map(|e| m.trace_state.mul(e)).collect())
                .collect()
        })
        .collect();
    let zeros = vec![cr(0.0); VERTEX_COUNT * VERTEX_COUNT * 16];
    let mut g = CqnsCorrelation::new(VERTEX_COUNT, VERTEX_COUNT, OUTCOME_DIM, zeros)?;
    for x in 0..VERTEX_COUNT {
        for y in 0..VERTEX_COUNT {
            for a in 0..OUTCOME_DIM {
                for ap in 0..OUTCOME_DIM {
                    for b in 0..OUTCOME_DIM {
                        for bp in 0..OUTCOME_DIM {
                            let v = trace_prod(&rho_e[x][a][ap], &m.units[y][bp][b]);
                            g.set(x, y, a, ap, b, bp, v);
                        }
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Residuals of the two perfect-coloring conditions for a CQNS correlation.
#[derive(Clone, Debug)]
pub struct PerfectCheck {
    /// Per input `x`: `‖Γ(ε_{x,x}⊗ε_{x,x}) − Ω_dΩ_d†‖`.
    pub diagonal_residuals: Vec<f64>,
    /// Per ordered pair `x ≠ y`: `|tr(Γ(ε_{x,x}⊗ε_{y,y})·Ω_dΩ_d†)|`,
    /// zero exactly when the output state is supported in Q_d.
    pub offdiagonal_residuals: Vec<((usize, usize), f64)>,
    /// Worst offending condition, if any.
    pub verdict: Verdict,
}

/// Checks whether a CQNS correlation is a perfect coloring correlation:
/// maximally entangled on the diagonal, supported in Q_d off the diagonal.
pub fn verify_perfect(g: &CqnsCorrelation, d: usize, tol: f64) -> Result<PerfectCheck> {
    if g.d != d {
        return Err(Error::Dimension(format!(
            "correlation has outcome dimension {}, expected {d}",
            g.d
        )));
    }
    if g.x_count != g.y_count {
        return Err(Error::Dimension(
            "perfect-coloring conditions need one input set shared by both sides".into(),
        ));
    }
    g.validate(tol)?.into_result()?;
    let j = max_entangled_projector(d);
    let mut checks = Checks::default();
    let mut diagonal_residuals = Vec::with_capacity(g.x_count);
    let mut offdiagonal_residuals = Vec::new();
    for x in 0..g.x_count {
        let r = g.output_state(x, x).sub(&j).norm();
        checks.push(format!("maximally entangled output at x={x}"), r, tol);
        diagonal_residuals.push(r);
    }
    for x in 0..g.x_count {
        for y in 0..g.y_count {
            if x == y {
                continue;
            }
            let r = trace_prod(&g.output_state(x, y), &j).norm();
            checks.push(format!("quantum-set support at ({x},{y})"), r, tol);
            offdiagonal_residuals.push(((x, y), r));
        }
    }
    Ok(PerfectCheck { diagonal_residuals, offdiagonal_residuals, verdict: checks.verdict() })
}

/// Residuals reported by [`extract_pauli_form`]. All norms are Frobenius.
#[derive(Clone, Debug)]
pub struct PauliFormReport {
    /// Worst deviation of `V e_{x,a,a'} V†` from `U_x†ε_{a,a'}U_x ⊗ I_N`
    /// over all sixteen matrix units.
    pub unit_residual: f64,
    /// Block-pattern residuals of `V₃V₁†` (diagonal, `σz ⊗ u`), `V₂V₁†`
    /// (antidiagonal, `σx ⊗ u`), and `V₄V₁†` (antidiagonal, `σy ⊗ u`),
    /// in that order.
    pub structure_residuals: [f64; 3],
    /// Worst partial-trace condition `‖(tr₂ ⊗ id)(V_xV_y†)‖` over `x ≠ y`.
    pub trace_residual: f64,
    /// Worst deviation of `V†V` and `VV†` from the identity.
    pub unitarity_residual: f64,
}

impl PauliFormReport {
    /// Largest residual across all certified identities.
    pub fn worst(&self) -> f64 {
        self.structure_residuals
            .iter()
            .copied()
            .fold(self.unit_residual.max(self.trace_residual).max(self.unitarity_residual), f64::max)
    }
}

/// Orthonormal basis of the range of a projection, as the eigenvectors
/// with eigenvalue above 1/2.
fn range_onb(p: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(&p.add(&p.dagger()).scale(cr(0.5)))?;
    let cols: Vec<CMatrix> = (0..p.rows())
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i))
        .collect();
    if cols.is_empty() {
        return Err(Error::Violation {
            description: "matrix unit e_{x,1,1} has empty range".into(),
            magnitude: 0.0,
        });
    }
    let refs: Vec<&CMatrix> = cols.iter().collect();
    Ok(CMatrix::hstack(&refs))
}

/// Stacks equal-width blocks vertically.
fn stack_rows(blocks: &[CMatrix]) -> CMatrix {
    let cols = blocks[0].cols();
    let rows: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        for i in 0..b.rows() {
            for j in 0..cols {
                out.set(r0 + i, j, b.at(i, j));
            }
        }
        r0 += b.rows();
    }
    out
}

/// Constructive rigidity for the coloring game, with the default gauge seed.
/// See [`extract_pauli_form_seeded`].
pub fn extract_pauli_form(m: &HomModel, tol: f64) -> Result<(CMatrix, usize, PauliFormReport)> {
    extract_pauli_form_seeded(m, tol, 0)
}

/// Recovers the Pauli form of a faithful model with the canonical coloring
/// correlation: a unitary `V : H → C² ⊗ C^N` with
/// `V e_{x,a,a'} V† = U_x†ε_{a,a'}U_x ⊗ I_N`.
///
/// The construction follows the rigidity proof. The reduction
/// `m ↦ Σ_{i,j} ε_{i,j} ⊗ e_{1,1,i}·m·e_{1,j,1}` identifies the generated
/// algebra with `M₂ ⊗ N`; compressing to an orthonormal basis of the range
/// of `e_{1,1,1}` realizes it as the block-row map `V₁`. The analogous maps
/// `V_x` for the other vertices need a gauge aligning the two ranges, fixed
/// by the unitary polar factor of `e_{x,1,1}·R·e_{1,1,1}` for a seeded
/// random `R` (redrawn up to eight times if the polar factor is
/// rank-deficient — a probability-zero event handled explicitly). The
/// report certifies the matrix-unit transport, the Pauli block patterns of
/// `V_xV₁†`, and the partial-trace conditions `(tr₂⊗id)(V_xV_y†) = 0`.
///
/// Returns the unitary, the multiplicity dimension `N`, and the residuals.
///
/// Errors when the model is invalid, its correlation differs from the
/// canonical one, or the trace state is not faithful.
pub fn extract_pauli_form_seeded(
    m: &HomModel,
    tol: f64,
    seed: u64,
) -> Result<(CMatrix, usize, PauliFormReport)> {
    m.validate(tol)?.into_result()?;
    let d = m.dim();

    let sym = m.trace_state.add(&m.trace_state.dagger()).scale(cr(0.5));
    let min = herm_eig(&sym)?.min_eigenvalue();
    if min <= tol {
        return Err(Error::Violation {
            description: format!("trace state is not faithful (minimum eigenvalue {min:.3e})"),
            magnitude: min.abs(),
        });
    }

    let g = gamma_correlation(m)?;
    let ideal = gamma_correlation(&pauli_hom_model())?;
    let mut mismatch = 0.0f64;
    for x in 0..VERTEX_COUNT {
        for y in 0..VERTEX_COUNT {
            for a in 0..OUTCOME_DIM {
                for ap in 0..OUTCOME_DIM {
                    for b in 0..OUTCOME_DIM {
                        for bp in 0..OUTCOME_DIM {
                            let dv = g.value(x, y, a, ap, b, bp) - ideal.value(x, y, a, ap, b, bp);
                            mismatch = mismatch.max(dv.norm());
                        }
                    }
                }
            }
        }
    }
    if mismatch > tol {
        return Err(Error::Violation {
            description: "correlation differs from the canonical coloring correlation".into(),
            magnitude: mismatch,
        });
    }

    let q1 = range_onb(&m.units[0][0][0])?;
    let k = q1.cols();
    if 2 * k != d {
        return Err(Error::Violation {
            description: format!(
                "matrix units fail to split the space evenly (rank {k} on dimension {d})"
            ),
            magnitude: (d as f64 - 2.0 * k as f64).abs(),
        });
    }
    let v1 = stack_rows(&[
        q1.dagger().mul(&m.units[0][0][0]),
        q1.dagger().mul(&m.units[0][0][1]),
    ]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vx = vec![v1.clone()];
    for x in 1..VERTEX_COUNT {
        let qx_raw = range_onb(&m.units[x][0][0])?;
        if qx_raw.cols() != k {
            return Err(Error::Violation {
                description: format!("matrix-unit ranges at x={x} and x=0 have different ranks"),
                magnitude: (qx_raw.cols() as f64 - k as f64).abs(),
            });
        }
        let mut qx = None;
        for _attempt in 0..8 {
            let r = random_gaussian(d, d, &mut rng);
            let core = qx_raw
                .dagger()
                .mul(&m.units[x][0][0])
                .mul(&r)
                .mul(&m.units[0][0][0])
                .mul(&q1);
            if let Ok(w) = polar_unitary(&core, tol) {
                qx = Some(qx_raw.mul(&w));
                break;
            }
        }
        let qx = qx.ok_or_else(|| {
            Error::Invalid(format!(
                "gauge between the ranges at x={x} and x=0 stayed rank-deficient after 8 draws"
            ))
        })?;
        vx.push(stack_rows(&[
            qx.dagger().mul(&m.units[x][0][0]),
            qx.dagger().mul(&m.units[x][0][1]),
        ]));
    }

    // Block patterns of V_xV₁†: σz ⊗ u (diagonal), σx ⊗ u and σy ⊗ u
    // (antidiagonal). The aux factor is recovered by averaging the blocks
    // against the conjugated pattern.
    let patterns = [(2usize, sigma_z()), (1, sigma_x()), (3, sigma_y())];
    let mut structure_residuals = [0.0f64; 3];
    for (slot, (x, p)) in patterns.iter().enumerate() {
        let big = vx[*x].mul(&v1.dagger());
        let mut u = CMatrix::zeros(k, k);
        for i in 0..2 {
            for j in 0..2 {
                let blk = big.block(i * k, j * k, k, k);
                u = u.add(&blk.scale(p.at(i, j).conj() * cr(0.5)));
            }
        }
        structure_residuals[slot] = big.sub(&kron(p, &u)).norm();
    }

    let mut trace_residual = 0.0f64;
    for x in 0..VERTEX_COUNT {
        for y in 0..VERTEX_COUNT {
            if x == y {
                continue;
            }
            let big = vx[x].mul(&vx[y].dagger());
            let t = big.block(0, 0, k, k).add(&big.block(k, k, k, k)).scale(cr(0.5));
            trace_residual = trace_residual.max(t.norm());
        }
    }

    let us = pauli_units();
    let id_k = CMatrix::identity(k);
    let mut unit_residual = 0.0f64;
    for x in 0..VERTEX_COUNT {
        for a in 0..OUTCOME_DIM {
            for ap in 0..OUTCOME_DIM {
                let lhs = v1.mul(&m.units[x][a][ap]).mul(&v1.dagger());
                let pattern = us[x].dagger().mul(&matrix_unit(a, ap)).mul(&us[x]);
                unit_residual = unit_residual.max(lhs.sub(&kron(&pattern, &id_k)).norm());
            }
        }
    }

    let unitarity_residual = v1
        .dagger()
        .mul(&v1)
        .sub(&CMatrix::identity(d))
        .norm()
        .max(v1.mul(&v1.dagger()).sub(&CMatrix::identity(2 * k)).norm());

    let report = PauliFormReport {
        unit_residual,
        structure_residuals,
        trace_residual,
        unitarity_residual,
    };
    Ok((v1, k, report))
}

/// A contextuality scenario: a finite hypergraph in which every vertex
/// lies in at least one edge. Probabilistic assignments are vectors over
/// the vertices that normalize over every edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    /// Number of vertices; assignments are indexed `0..vertices`.
    pub vertices: usize,
    /// Hyperedges as lists of distinct vertex indices.
    pub edges: Vec<Vec<usize>>,
}

impl Scenario {
    /// Builds a scenario, rejecting empty or out-of-range edges, repeated
    /// vertices within an edge, and vertices not covered by any edge.
    pub fn new(vertices: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let mut covered = vec![false; vertices];
        for (i, e) in edges.iter().enumerate() {
            if e.is_empty() {
                return Err(Error::Invalid(format!("edge {i} is empty")));
            }
            let mut seen = vec![false; vertices];
            for &v in e {
                if v >= vertices {
                    return Err(Error::Dimension(format!(
                        "edge {i} references vertex {v}, scenario has {vertices}"
                    )));
                }
                if seen[v] {
                    return Err(Error::Invalid(format!("edge {i} repeats vertex {v}")));
                }
                seen[v] = true;
                covered[v] = true;
            }
        }
        if let Some(v) = covered.iter().position(|&c| !c) {
            return Err(Error::Invalid(format!("vertex {v} lies in no edge")));
        }
        Ok(Self { vertices, edges })
    }
}

/// The Bell scenario `B_{X,A}`: vertices are input-outcome pairs `(x,a)`
/// (indexed `x·a_count + a`), and each input contributes the edge
/// `{x} × A`. Assignments are exactly the conditional tables `p(a|x)`.
pub fn bell_scenario(x_count: usize, a_count: usize) -> Result<Scenario> {
    if x_count == 0 || a_count == 0 {
        return Err(Error::Dimension("Bell scenario needs nonempty input and outcome sets".into()));
    }
    let edges = (0..x_count)
        .map(|x| (0..a_count).map(|a| x * a_count + a).collect())
        .collect();
    Scenario::new(x_count * a_count, edges)
}

/// The cycle scenario `G_n`: vertices `x_0,…,x_{n−1}` (indices `0..n`)
/// and `x_{i,i+1}` (indices `n..2n`), with the `n` edges
/// `{x_i, x_{i+1}, x_{i,i+1}}` taken cyclically. Odd `n` gives the odd-cycle
/// scenarios whose assignments witness contextuality.
pub fn cycle_scenario(n: usize) -> Result<Scenario> {
    if n < 3 {
        return Err(Error::Dimension(format!("cycle scenario needs n ≥ 3, got {n}")));
    }
    let edges = (0..n).map(|i| vec![i, (i + 1) % n, n + i]).collect();
    Scenario::new(2 * n, edges)
}

/// The product scenario `G × H`: vertex set `V × W` (indexed
/// `v·|W| + w`) and one edge `e × f` per pair of edges.
pub fn product_scenario(g: &Scenario, h: &Scenario) -> Scenario {
    let mut edges = Vec::with_capacity(g.edges.len() * h.edges.len());
    for e in &g.edges {
        for f in &h.edges {
            let mut ef = Vec::with_capacity(e.len() * f.len());
            for &v in e {
                for &w in f {
                    ef.push(v * h.vertices + w);
                }
            }
            edges.push(ef);
        }
    }
    Scenario::new(g.vertices * h.vertices, edges).expect("product of valid scenarios")
}

/// Outcome of a scenario assignment check.
#[derive(Clone, Debug)]
pub struct ScenarioCheck {
    /// Per-edge residuals `|Σ_{x∈e} p(x) − 1|`, in edge order.
    pub edge_residuals: Vec<f64>,
    /// No-signalling equality residuals (product checks only; empty for a
    /// single scenario).
    pub ns_residuals: Vec<f64>,
    /// Worst offending condition, if any.
    pub verdict: Verdict,
}

fn check_assignment(s: &Scenario, p: &[f64], tol: f64, checks: &mut Checks) -> Vec<f64> {
    for (v, &value) in p.iter().enumerate() {
        checks.push(format!("nonnegativity at vertex {v}"), (-value).max(0.0), tol);
    }
    let mut edge_residuals = Vec::with_capacity(s.edges.len());
    for (i, e) in s.edges.iter().enumerate() {
        let sum: f64 = e.iter().map(|&v| p[v]).sum();
        let r = (sum - 1.0).abs();
        checks.push(format!("edge {i} normalization"), r, tol);
        edge_residuals.push(r);
    }
    edge_residuals
}

/// Checks a probabilistic assignment on a scenario: nonnegativity and
/// normalization `Σ_{x∈e} p(x) = 1` over every edge.
pub fn scenario_check(s: &Scenario, p: &[f64], tol: f64) -> Result<ScenarioCheck> {
    if p.len() != s.vertices {
        return Err(Error::Dimension(format!(
            "assignment has {} values, scenario has {} vertices",
            p.len(),
            s.vertices
        )));
    }
    let mut checks = Checks::default();
    let edge_residuals = check_assignment(s, p, tol, &mut checks);
    Ok(ScenarioCheck { edge_residuals, ns_residuals: Vec::new(), verdict: checks.verdict() })
}

/// Checks a joint assignment on the product `G × H` (indexed
/// `v·|W| + w`): per-edge normalization on every product edge plus the two
/// no-signalling families — for each vertex `w`, the sum `Σ_{v∈e} p(v,w)`
/// must not depend on the edge `e` of `G`, and symmetrically for each `v`
/// over the edges of `H`.
pub fn product_scenario_check(
    g: &Scenario,
    h: &Scenario,
    p: &[f64],
    tol: f64,
) -> Result<ScenarioCheck> {
    if p.len() != g.vertices * h.vertices {
        return Err(Error::Dimension(format!(
            "joint assignment has {} values, product scenario has {}",
            p.len(),
            g.vertices * h.vertices
        )));
    }
    let prod = product_scenario(g, h);
    let mut checks = Checks::default();
    let edge_residuals = check_assignment(&prod, p, tol, &mut checks);
    let mut ns_residuals = Vec::new();
    for w in 0..h.vertices {
        let sums: Vec<f64> = g
            .edges
            .iter()
            .map(|e| e.iter().map(|&v| p[v * h.vertices + w]).sum())
            .collect();
        for (i, s) in sums.iter().enumerate().skip(1) {
            let r = (s - sums[0]).abs();
            checks.push(format!("no-signalling to w={w} between edges 0 and {i}"), r, tol);
            ns_residuals.push(r);
        }
    }
    for v in 0..g.vertices {
        let sums: Vec<f64> = h
            .edges
            .iter()
            .map(|f| f.iter().map(|&w| p[v * h.vertices + w]).sum())
            .collect();
        for (i, s) in sums.iter().enumerate().skip(1) {
            let r = (s - sums[0]).abs();
            checks.push(format!("no-signalling to v={v} between edges 0 and {i}"), r, tol);
            ns_residuals.push(r);
        }
    }
    Ok(ScenarioCheck { edge_residuals, ns_residuals, verdict: checks.verdict() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::random_unitary;
    use crate::models::correlation_ns;

    fn ampliated_pauli(k: usize) -> Vec<Vec<Vec<CMatrix>>> {
        let base = pauli_hom_model();
        let id_k = CMatrix::identity(k);
        base.units
            .iter()
            .map(|per_x| {
                per_x
                    .iter()
                    .map(|row| row.iter().map(|e| kron(e, &id_k)).collect())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn pauli_model_invariants_are_exact() {
        let m = pauli_hom_model();
        assert!(m.validate(1e-14).unwrap().is_valid());
        // First system is the standard matrix units (U₁ = I).
        for a in 0..2 {
            for ap in 0..2 {
                assert!(m.units[0][a][ap].sub(&matrix_unit(a, ap)).norm() <= 1e-15);
            }
        }
        // Cross-vertex orthogonality, all six pairs directly.
        for x in 0..4 {
            for y in (x + 1)..4 {
                let mut s = CMatrix::zeros(2, 2);
                for a in 0..2 {
                    for b in 0..2 {
                        s = s.add(&m.units[x][a][b].mul(&m.units[y][b][a]));
                    }
                }
                assert!(s.norm() <= 1e-14, "pair ({x},{y})");
            }
        }
        // Pauli trace orthogonality.
        let us = pauli_units();
        for (x, ux) in us.iter().enumerate() {
            for (y, uy) in us.iter().enumerate() {
                let overlap = trace_prod(ux, &uy.dagger()) / cr(2.0);
                let target = if x == y { cr(1.0) } else { cr(0.0) };
                assert!((overlap - target).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn gamma_of_pauli_model_is_perfect() {
        let g = gamma_correlation(&pauli_hom_model()).unwrap();
        assert!(g.validate(1e-12).unwrap().is_valid());
        let j = max_entangled_projector(2);
        for x in 0..4 {
            assert!(g.output_state(x, x).sub(&j).norm() <= 1e-14);
            for y in 0..4 {
                if x != y {
                    assert!(trace_prod(&g.output_state(x, y), &j).norm() <= 1e-14);
                }
            }
        }
        let check = verify_perfect(&g, 2, 1e-12).unwrap();
        assert!(check.verdict.is_valid());
        assert_eq!(check.diagonal_residuals.len(), 4);
        assert_eq!(check.offdiagonal_residuals.len(), 12);
    }

    #[test]
    fn gamma_rejects_scaled_trace_state() {
        let mut m = pauli_hom_model();
        m.trace_state = CMatrix::identity(2);
        let err = gamma_correlation(&m).unwrap_err();
        assert!(matches!(err, Error::Violation { .. }), "{err}");
    }

    /// The diagonal embedding of the classical same-answer table
    /// `p(a,b) = δ_{a,b}/2` is a valid CQNS correlation, but its output
    /// states are the dephased projector: the coherences of `Ω₂Ω₂†` are
    /// exactly what the diagonal condition detects.
    fn classical_identity_pattern() -> CqnsCorrelation {
        let mut g =
            CqnsCorrelation::new(4, 4, 2, vec![cr(0.0); 4 * 4 * 16]).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                for a in 0..2 {
                    g.set(x, y, a, a, a, a, cr(0.5));
                }
            }
        }
        g
    }

    #[test]
    fn perfect_check_flags_classical_identity_pattern() {
        let g = classical_identity_pattern();
        assert!(g.validate(1e-12).unwrap().is_valid());
        let check = verify_perfect(&g, 2, 1e-12).unwrap();
        assert!(!check.verdict.is_valid());
        // ‖dephased(J) − J‖ is the norm of the two killed coherences.
        for r in &check.diagonal_residuals {
            assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-12);
        }
        for (_, r) in &check.offdiagonal_residuals {
            assert!((r - 0.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn perfect_check_is_linear_in_mixtures() {
        let gamma = gamma_correlation(&pauli_hom_model()).unwrap();
        let bad = classical_identity_pattern();
        let mut mix = CqnsCorrelation::new(4, 4, 2, vec![cr(0.0); 4 * 4 * 16]).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                for a in 0..2 {
                    for ap in 0..2 {
                        for b in 0..2 {
                            for bp in 0..2 {
                                let v = (gamma.value(x, y, a, ap, b, bp)
                                    + bad.value(x, y, a, ap, b, bp))
                                    * cr(0.5);
                                mix.set(x, y, a, ap, b, bp, v);
                            }
                        }
                    }
                }
            }
        }
        let full = verify_perfect(&bad, 2, 1e-12).unwrap();
        let half = verify_perfect(&mix, 2, 1e-12).unwrap();
        assert!(!half.verdict.is_valid());
        for (r_half, r_full) in half.diagonal_residuals.iter().zip(&full.diagonal_residuals) {
            assert!((r_half - 0.5 * r_full).abs() <= 1e-12);
        }
        for ((_, r_half), (_, r_full)) in
            half.offdiagonal_residuals.iter().zip(&full.offdiagonal_residuals)
        {
            assert!((r_half - 0.5 * r_full).abs() <= 1e-12);
        }
    }

    #[test]
    fn extraction_is_identity_on_canonical_model() {
        let m = pauli_hom_model();
        let (v, n_dim, report) = extract_pauli_form(&m, 1e-9).unwrap();
        assert_eq!(n_dim, 1);
        assert!(report.worst() <= 1e-12, "worst {:.3e}", report.worst());
        // V is the identity up to a phase.
        assert!((v.at(0, 0).norm() - 1.0).abs() <= 1e-12);
        assert!(v.at(0, 1).norm() <= 1e-12);
        assert!(v.at(1, 0).norm() <= 1e-12);
    }

    #[test]
    fn extraction_recovers_conjugated_ampliations() {
        use rand::SeedableRng;
        for (seed, k) in [(11u64, 1usize), (12, 2), (13, 3)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 2 * k;
            let q = random_unitary(d, &mut rng);
            let units: Vec<Vec<Vec<CMatrix>>> = ampliated_pauli(k)
                .iter()
                .map(|per_x| {
                    per_x
                        .iter()
                        .map(|row| {
                            row.iter().map(|e| q.mul(e).mul(&q.dagger())).collect()
                        })
                        .collect()
                })
                .collect();
            let state = CMatrix::identity(d).scale(cr(1.0 / d as f64));
            let m = HomModel::new(units, state).unwrap();
            let (v, n_dim, report) = extract_pauli_form(&m, 1e-9).unwrap();
            assert_eq!(n_dim, k);
            assert_eq!(v.rows(), d);
            assert!(report.worst() <= 1e-8, "k={k} worst {:.3e}", report.worst());
            assert!(report.trace_residual <= 1e-8);
        }
    }

    #[test]
    fn extraction_rejects_unfaithful_trace_state() {
        let units = ampliated_pauli(2);
        let mut rho = CMatrix::zeros(4, 4);
        rho.set(0, 0, cr(0.5));
        rho.set(2, 2, cr(0.5));
        let m = HomModel::new(units, rho).unwrap();
        assert!(m.validate(1e-12).unwrap().is_valid());
        let err = extract_pauli_form(&m, 1e-9).unwrap_err();
        match err {
            Error::Violation { description, .. } => assert!(description.contains("faithful")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn extraction_rejects_relabeled_correlation() {
        // Swapping σz and σy still satisfies every model invariant (any
        // Pauli order is a unitary error basis) but changes the correlation.
        let us = [CMatrix::identity(2), sigma_x(), sigma_y(), sigma_z()];
        let units: Vec<Vec<Vec<CMatrix>>> = us
            .iter()
            .map(|u| {
                (0..2)
                    .map(|a| {
                        (0..2)
                            .map(|ap| u.dagger().mul(&matrix_unit(a, ap)).mul(u))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let m = HomModel::new(units, CMatrix::identity(2).scale(cr(0.5))).unwrap();
        assert!(m.validate(1e-12).unwrap().is_valid());
        let err = extract_pauli_form(&m, 1e-9).unwrap_err();
        match err {
            Error::Violation { description, .. } => {
                assert!(description.contains("correlation"))
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn model_shape_errors() {
        let base = pauli_hom_model();
        let err =
            HomModel::new(base.units[..3].to_vec(), base.trace_state.clone()).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        let err = HomModel::new(base.units.clone(), CMatrix::identity(3)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn scenario_constructors_and_guards() {
        let cycle = cycle_scenario(3).unwrap();
        assert_eq!(cycle.vertices, 6);
        assert_eq!(cycle.edges, vec![vec![0, 1, 3], vec![1, 2, 4], vec![2, 0, 5]]);
        assert!(cycle_scenario(2).is_err());

        let bell = bell_scenario(2, 2).unwrap();
        assert_eq!(bell.vertices, 4);
        assert_eq!(bell.edges, vec![vec![0, 1], vec![2, 3]]);

        // Vertex 2 lies in no edge.
        assert!(Scenario::new(3, vec![vec![0, 1]]).is_err());
        // Out-of-range vertex.
        assert!(Scenario::new(2, vec![vec![0, 2]]).is_err());
        // Repeated vertex within an edge.
        assert!(Scenario::new(2, vec![vec![0, 0], vec![1]]).is_err());
        // Length mismatch between scenario and assignment.
        assert!(scenario_check(&bell, &[0.5; 3], 1e-9).is_err());
    }

    #[test]
    fn cycle_uniform_assignment_is_valid() {
        // For n = 3 every edge has three vertices, so the fully uniform
        // assignment puts 1/3 on each and every edge sums to one.
        let s = cycle_scenario(3).unwrap();
        let p = [1.0 / 3.0; 6];
        let check = scenario_check(&s, &p, 1e-9).unwrap();
        assert!(check.verdict.is_valid());
        assert!(check.edge_residuals.iter().all(|r| *r <= 1e-15));
    }

    #[test]
    fn deficient_edge_reports_its_gap() {
        let s = cycle_scenario(3).unwrap();
        // Valid assignment 0.45/0.45/0.1 per edge, then empty one slack
        // vertex so that exactly the first edge sums to 0.9.
        let mut p = vec![0.45, 0.45, 0.45, 0.1, 0.1, 0.1];
        p[3] = 0.0;
        let check = scenario_check(&s, &p, 1e-9).unwrap();
        assert!(!check.verdict.is_valid());
        assert!((check.verdict.magnitude() - 0.1).abs() <= 1e-12);
        assert!((check.edge_residuals[0] - 0.1).abs() <= 1e-12);
        assert!(check.edge_residuals[1] <= 1e-15);
        assert!(check.edge_residuals[2] <= 1e-15);
    }

    #[test]
    fn bell_product_assignment_matches_ns_invariants() {
        let p = correlation_ns(&crate::chsh::ideal_model()).unwrap();
        assert!(p.validate(1e-9).is_valid());
        let bell = bell_scenario(2, 2).unwrap();
        let mut joint = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        joint[(x * 2 + a) * 4 + (y * 2 + b)] = p.value(x, y, a, b);
                    }
                }
            }
        }
        let check = product_scenario_check(&bell, &bell, &joint, 1e-9).unwrap();
        assert!(check.verdict.is_valid());
        assert_eq!(check.edge_residuals.len(), 4);
        assert!(check.ns_residuals.iter().all(|r| *r <= 1e-12));

        // Shifting weight between Bob's outcomes at one input pair keeps
        // every edge normalized but signals Bob's marginal to Alice's input.
        let mut skew = joint.clone();
        skew[0] += 0.05; // p(0,0|0,0)
        skew[1] -= 0.05; // p(0,1|0,0)
        let check = product_scenario_check(&bell, &bell, &skew, 1e-9).unwrap();
        assert!(!check.verdict.is_valid());
        assert!(check.edge_residuals.iter().all(|r| *r <= 1e-12));
        assert!((check.verdict.magnitude() - 0.05).abs() <= 1e-12);
    }
}

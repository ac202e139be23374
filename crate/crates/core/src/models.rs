//! Measurement-model data types, validity checks, correlation extraction,
//! support/reduction constructions, and commuting-to-tensor splitting.
//!
//! A [`Model`] bundles Alice/Bob [`MeasurementFamily`] values with a shared
//! unit state vector, either on a tensor split `H_A ⊗ H_B` or on a single
//! space with commuting families. Models give rise to correlations:
//! classical no-signalling tables ([`NsCorrelation`]) for POVM/PVM families,
//! and quantum no-signalling tensors ([`QnsCorrelation`]) for stochastic
//! operator matrices (SOMs). [`support_data`] computes the support
//! projections of the state with respect to each party's algebra and the
//! induced reduced model; [`split_commuting`] exhibits a commuting model as
//! a convex combination of tensor-split blocks via the finite-dimensional
//! decomposition `H ≅ ⊕_i H_i ⊗ K_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::{
    c, commutant_basis, cr, herm_eig, kron, randn, CMatrix, C64,
};

/// Validity class of a measurement family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    Povm,
    Pvm,
    Som,
    Usom,
}

impl FamilyKind {
    /// True for the flat (per-input, per-outcome) kinds.
    pub fn is_flat(self) -> bool {
        matches!(self, FamilyKind::Povm | FamilyKind::Pvm)
    }
}

/// Block storage: POVM/PVM families hold `E[x][a]`; SOM/USOM families hold
/// the doubly indexed `E[x][x'][a][a']`.
#[derive(Clone, Debug)]
pub enum Blocks {
    Flat(Vec<Vec<CMatrix>>),
    Paired(Vec<Vec<Vec<Vec<CMatrix>>>>),
}

/// A labeled family of measurement operators on a local space of dimension
/// `h`: a POVM or PVM `E[x][a]`, or a stochastic operator matrix
/// `E[x][x'][a][a']` (USOM when it admits unitary Gram vectors).
#[derive(Clone, Debug)]
pub struct MeasurementFamily {
    kind: FamilyKind,
    x_count: usize,
    a_count: usize,
    h: usize,
    blocks: Blocks,
}

impl MeasurementFamily {
    /// Builds a POVM family from blocks `E[x][a]`.
    pub fn povm(blocks: Vec<Vec<CMatrix>>) -> Result<Self> {
        Self::flat(FamilyKind::Povm, blocks)
    }

    /// Builds a PVM family from blocks `E[x][a]`.
    pub fn pvm(blocks: Vec<Vec<CMatrix>>) -> Result<Self> {
        Self::flat(FamilyKind::Pvm, blocks)
    }

    /// Builds a SOM family from blocks `E[x][x'][a][a']`.
    pub fn som(blocks: Vec<Vec<Vec<Vec<CMatrix>>>>) -> Result<Self> {
        Self::paired(FamilyKind::Som, blocks)
    }

    /// Builds a USOM family from blocks `E[x][x'][a][a']`.
    pub fn usom(blocks: Vec<Vec<Vec<Vec<CMatrix>>>>) -> Result<Self> {
        Self::paired(FamilyKind::Usom, blocks)
    }

    fn flat(kind: FamilyKind, blocks: Vec<Vec<CMatrix>>) -> Result<Self> {
        let x_count = blocks.len();
        let a_count = blocks.first().map_or(0, Vec::len);
        if x_count == 0 || a_count == 0 {
            return Err(Error::Dimension("measurement family needs at least one block".into()));
        }
        let h = blocks[0][0].rows();
        for (x, row) in blocks.iter().enumerate() {
            if row.len() != a_count {
                return Err(Error::Dimension(format!("input {x}: ragged outcome count")));
            }
            for (a, b) in row.iter().enumerate() {
                if b.rows() != h || b.cols() != h {
                    return Err(Error::Dimension(format!(
                        "block E[{x}][{a}] is {}x{}, expected {h}x{h}",
                        b.rows(),
                        b.cols()
                    )));
                }
            }
        }
        Ok(Self { kind, x_count, a_count, h, blocks: Blocks::Flat(blocks) })
    }

    fn paired(kind: FamilyKind, blocks: Vec<Vec<Vec<Vec<CMatrix>>>>) -> Result<Self> {
        let x_count = blocks.len();
        if x_count == 0 {
            return Err(Error::Dimension("measurement family needs at least one block".into()));
        }
        let a_count = blocks[0][0].len();
        let h = blocks[0][0][0][0].rows();
        for x in 0..x_count {
            if blocks[x].len() != x_count {
                return Err(Error::Dimension(format!("row {x}: ragged input count")));
            }
            for xp in 0..x_count {
                if blocks[x][xp].len() != a_count {
                    return Err(Error::Dimension(format!("block ({x},{xp}): ragged outcome count")));
                }
                for a in 0..a_count {
                    if blocks[x][xp][a].len() != a_count {
                        return Err(Error::Dimension(format!(
                            "block ({x},{xp},{a}): ragged outcome count"
                        )));
                    }
                    for ap in 0..a_count {
                        let b = &blocks[x][xp][a][ap];
                        if b.rows() != h || b.cols() != h {
                            return Err(Error::Dimension(format!(
                                "block E[{x}][{xp}][{a}][{ap}] is {}x{}, expected {h}x{h}",
                                b.rows(),
                                b.cols()
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { kind, x_count, a_count, h, blocks: Blocks::Paired(blocks) })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn x_count(&self) -> usize {
        self.x_count
    }

    pub fn a_count(&self) -> usize {
        self.a_count
    }

    /// Local dimension of the blocks.
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    /// POVM/PVM block accessor.
    pub fn flat_block(&self, x: usize, a: usize) -> &CMatrix {
        match &self.blocks {
            Blocks::Flat(b) => &b[x][a],
            Blocks::Paired(_) => panic!("flat_block on SOM family"),
        }
    }

    /// SOM/USOM block accessor.
    pub fn som_block(&self, x: usize, xp: usize, a: usize, ap: usize) -> &CMatrix {
        match &self.blocks {
            Blocks::Paired(b) => &b[x][xp][a][ap],
            Blocks::Flat(_) => panic!("som_block on POVM family"),
        }
    }

    /// Re-declares the family under a different validity class with the
    /// same block layout (e.g. a PVM as a POVM).
    pub fn rekind(&self, kind: FamilyKind) -> Result<Self> {
        if kind.is_flat() != self.kind.is_flat() {
            return Err(Error::Invalid("rekind across block layouts".into()));
        }
        Ok(Self { kind, ..self.clone() })
    }

    /// All blocks in a fixed flattened order (POVM: `x·A + a`; SOM:
    /// `((x·X + x')·A + a)·A + a'`). Used to index dilation generators.
    pub fn generator_blocks(&self) -> Vec<&CMatrix> {
        match &self.blocks {
            Blocks::Flat(b) => b.iter().flatten().collect(),
            Blocks::Paired(b) => b
                .iter()
                .flatten()
                .flatten()
                .flatten()
                .collect(),
        }
    }

    /// Number of flattened generator blocks.
    pub fn generator_count(&self) -> usize {
        match &self.blocks {
            Blocks::Flat(_) => self.x_count * self.a_count,
            Blocks::Paired(_) => self.x_count * self.x_count * self.a_count * self.a_count,
        }
    }

    /// Applies `f` to every block, preserving kind and index structure.
    pub fn map_blocks(&self, mut f: impl FnMut(&CMatrix) -> CMatrix) -> Self {
        let blocks = match &self.blocks {
            Blocks::Flat(b) => {
                Blocks::Flat(b.iter().map(|row| row.iter().map(&mut f).collect()).collect())
            }
            Blocks::Paired(b) => Blocks::Paired(
                b.iter()
                    .map(|r1| {
                        r1.iter()
                            .map(|r2| {
                                r2.iter().map(|r3| r3.iter().map(&mut f).collect()).collect()
                            })
                            .collect()
                    })
                    .collect(),
            ),
        };
        let h = match &blocks {
            Blocks::Flat(b) => b[0][0].rows(),
            Blocks::Paired(b) => b[0][0][0][0].rows(),
        };
        Self { kind: self.kind, x_count: self.x_count, a_count: self.a_count, h, blocks }
    }

    /// The `(|X||A|h)`-sized block matrix `[E_{x,x',a,a'}]` with row index
    /// `(x·A + a)·h + i`, used for SOM positivity and Gram factorization.
    pub fn som_matrix(&self) -> Result<CMatrix> {
        let (xc, ac, h) = (self.x_count, self.a_count, self.h);
        match &self.blocks {
            Blocks::Flat(_) => Err(Error::Invalid("som_matrix on a POVM/PVM family".into())),
            Blocks::Paired(b) => {
                let n = xc * ac * h;
                let mut big = CMatrix::zeros(n, n);
                for x in 0..xc {
                    for xp in 0..xc {
                        for a in 0..ac {
                            for ap in 0..ac {
                                big.insert((x * ac + a) * h, (xp * ac + ap) * h, &b[x][xp][a][ap]);
                            }
                        }
                    }
                }
                Ok(big)
            }
        }
    }
}

/// Outcome of an invariant check: valid, or the worst-offending constraint
/// with its residual magnitude.
#[derive(Clone, Debug)]
pub enum Verdict {
    Valid,
    Violation { description: String, magnitude: f64 },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    /// Residual magnitude (0 for valid verdicts).
    pub fn magnitude(&self) -> f64 {
        match self {
            Verdict::Valid => 0.0,
            Verdict::Violation { magnitude, .. } => *magnitude,
        }
    }

    /// Converts a violating verdict into an error.
    pub fn into_result(self) -> Result<()> {
        match self {
            Verdict::Valid => Ok(()),
            Verdict::Violation { description, magnitude } => {
                Err(Error::Violation { description, magnitude })
            }
        }
    }
}

/// Accumulates constraint residuals and reports the worst one above cut.
#[derive(Default)]
pub(crate) struct Checks {
    worst: Option<(String, f64)>,
}

impl Checks {
    pub(crate) fn push(&mut self, description: impl Into<String>, residual: f64, cut: f64) {
        if residual > cut && self.worst.as_ref().map_or(true, |(_, m)| residual > *m) {
            self.worst = Some((description.into(), residual));
        }
    }

    pub(crate) fn verdict(self) -> Verdict {
        match self.worst {
            None => Verdict::Valid,
            Some((description, magnitude)) => Verdict::Violation { description, magnitude },
        }
    }
}

/// Checks the kind-specific invariants of a measurement family and reports
/// the worst-offending constraint, if any.
pub fn validate(f: &MeasurementFamily, tol: f64) -> Result<Verdict> {
    let mut checks = Checks::default();
    let id = CMatrix::identity(f.h);
    match &f.blocks {
        Blocks::Flat(blocks) => {
            let scale = blocks
                .iter()
                .flatten()
                .map(CMatrix::norm)
                .fold(1.0f64, f64::max);
            let cut = tol * scale;
            for (x, row) in blocks.iter().enumerate() {
                let mut sum = CMatrix::zeros(f.h, f.h);
                for (a, e) in row.iter().enumerate() {
                    checks.push(format!("E[{x}][{a}] hermitian"), e.herm_residual(), cut);
                    if e.herm_residual() <= cut {
                        let min = herm_eig(&e.add(&e.dagger()).scale(cr(0.5)))?.min_eigenvalue();
                        checks.push(format!("E[{x}][{a}] positive"), (-min).max(0.0), cut);
                    }
                    if f.kind == FamilyKind::Pvm {
                        checks.push(
                            format!("E[{x}][{a}] idempotent"),
                            e.mul(e).dist(e),
                            cut,
                        );
                    }
                    sum = sum.add(e);
                }
                checks.push(format!("input {x} completeness"), sum.dist(&id), cut);
            }
        }
        Blocks::Paired(blocks) => {
            let big = f.som_matrix()?;
            let scale = big.norm().max(1.0);
            let cut = tol * scale;
            let herm = big.herm_residual();
            checks.push("som block matrix hermitian", herm, cut);
            if herm <= cut {
                let eig = herm_eig(&big.add(&big.dagger()).scale(cr(0.5)))?;
                checks.push(
                    "som block matrix positive",
                    (-eig.min_eigenvalue()).max(0.0),
                    cut,
                );
                if f.kind == FamilyKind::Usom {
                    if f.x_count != f.a_count {
                        checks.push(
                            "unistochastic structure requires equal input and output sets",
                            f.x_count.abs_diff(f.a_count) as f64,
                            0.0,
                        );
                    } else {
                        // A SOM with X = A is unistochastic exactly when the
                        // Gram rank of its block matrix is at most h: a rank-h
                        // factor padded to h rows yields the unitary blocks.
                        let rank = eig.eigenvalues.iter().filter(|&&l| l > cut).count();
                        if rank > f.h {
                            checks.push(
                                "unistochastic gram rank exceeds local dimension",
                                eig.eigenvalues[big.rows() - f.h - 1],
                                0.0,
                            );
                        }
                    }
                }
            }
            for x in 0..f.x_count {
                for xp in 0..f.x_count {
                    let mut tra = CMatrix::zeros(f.h, f.h);
                    for a in 0..f.a_count {
                        tra = tra.add(&blocks[x][xp][a][a]);
                    }
                    let target = if x == xp { id.clone() } else { CMatrix::zeros(f.h, f.h) };
                    checks.push(format!("Tr_A condition ({x},{xp})"), tra.dist(&target), cut);
                }
            }
        }
    }
    Ok(checks.verdict())
}

/// Hilbert-space layout of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    TensorSplit { dim_a: usize, dim_b: usize },
    Commuting { dim_h: usize },
}

impl Flavor {
    pub fn total_dim(&self) -> usize {
        match self {
            Flavor::TensorSplit { dim_a, dim_b } => dim_a * dim_b,
            Flavor::Commuting { dim_h } => *dim_h,
        }
    }
}

/// A measurement model: Alice/Bob operator families plus a shared unit
/// state vector, on a tensor split or a single space with commuting
/// families.
#[derive(Clone, Debug)]
pub struct Model {
    pub flavor: Flavor,
    pub alice: MeasurementFamily,
    pub bob: MeasurementFamily,
    pub state: CMatrix,
}

impl Model {
    /// Builds a model, enforcing dimensional consistency (numeric invariants
    /// are checked separately by [`Model::validate`]).
    pub fn new(
        flavor: Flavor,
        alice: MeasurementFamily,
        bob: MeasurementFamily,
        state: CMatrix,
    ) -> Result<Self> {
        match flavor {
            Flavor::TensorSplit { dim_a, dim_b } => {
                if alice.h() != dim_a || bob.h() != dim_b {
                    return Err(Error::Dimension(format!(
                        "tensor-split dims ({dim_a},{dim_b}) vs family dims ({},{})",
                        alice.h(),
                        bob.h()
                    )));
                }
            }
            Flavor::Commuting { dim_h } => {
                if alice.h() != dim_h || bob.h() != dim_h {
                    return Err(Error::Dimension(format!(
                        "commuting dim {dim_h} vs family dims ({},{})",
                        alice.h(),
                        bob.h()
                    )));
                }
            }
        }
        if state.cols() != 1 || state.rows() != flavor.total_dim() {
            return Err(Error::Dimension(format!(
                "state is {}x{}, expected {}x1",
                state.rows(),
                state.cols(),
                flavor.total_dim()
            )));
        }
        Ok(Self { flavor, alice, bob, state })
    }

    pub fn total_dim(&self) -> usize {
        self.flavor.total_dim()
    }

    /// Expectation `⟨(E ⊗ F)ξ, ξ⟩` (tensor split) or `⟨EFξ, ξ⟩` (commuting)
    /// for one Alice block and one Bob block.
    pub fn pair_expectation(&self, a_block: &CMatrix, b_block: &CMatrix) -> C64 {
        self.pair_apply(a_block, b_block).inner(&self.state)
    }

    /// The measured vector `(E ⊗ F)ξ` or `EFξ`.
    pub fn pair_apply(&self, a_block: &CMatrix, b_block: &CMatrix) -> CMatrix {
        match self.flavor {
            Flavor::TensorSplit { dim_a, dim_b } => {
                // (E ⊗ F) vec_row(M) = vec_row(E M F^T) with the state
                // reshaped to a dA x dB coefficient matrix.
                let m = CMatrix::from_fn(dim_a, dim_b, |i, j| self.state.at(i * dim_b + j, 0));
                let out = a_block.mul(&m).mul(&b_block.transpose());
                CMatrix::from_fn(dim_a * dim_b, 1, |k, _| out.at(k / dim_b, k % dim_b))
            }
            Flavor::Commuting { .. } => a_block.mul(&b_block.mul(&self.state)),
        }
    }

    /// Checks all model invariants: unit state, family validity, dimension
    /// consistency, and (commuting flavor) pairwise commutation
    /// `‖[E,F]‖ ≤ tol·‖E‖·‖F‖`.
    pub fn validate(&self, tol: f64) -> Result<Verdict> {
        let mut checks = Checks::default();
        checks.push("state norm", (self.state.norm() - 1.0).abs(), tol);
        for (name, fam) in [("alice", &self.alice), ("bob", &self.bob)] {
            if let Verdict::Violation { description, magnitude } = validate(fam, tol)? {
                checks.push(format!("{name}: {description}"), magnitude, 0.0);
            }
        }
        if let Flavor::Commuting { .. } = self.flavor {
            for (i, e) in self.alice.generator_blocks().iter().enumerate() {
                if e.norm() == 0.0 {
                    continue;
                }
                for (j, f) in self.bob.generator_blocks().iter().enumerate() {
                    if f.norm() == 0.0 {
                        continue;
                    }
                    let comm = e.mul(f).dist(&f.mul(e));
                    checks.push(
                        format!("commutation of alice block {i} with bob block {j}"),
                        comm,
                        tol * e.norm() * f.norm(),
                    );
                }
            }
        }
        Ok(checks.verdict())
    }

    /// Validates and converts a violation into an error (preconditions of
    /// the correlation and dilation operations).
    pub fn require_valid(&self, tol: f64) -> Result<()> {
        self.validate(tol)?.into_result()
    }

    /// Alice/Bob generator blocks embedded on the joint space: `E ⊗ I` and
    /// `I ⊗ F` for tensor splits, the blocks themselves for commuting
    /// models.
    pub fn embedded_generators(&self) -> (Vec<CMatrix>, Vec<CMatrix>) {
        match self.flavor {
            Flavor::TensorSplit { dim_a, dim_b } => {
                let ia = CMatrix::identity(dim_a);
                let ib = CMatrix::identity(dim_b);
                (
                    self.alice.generator_blocks().iter().map(|e| kron(e, &ib)).collect(),
                    self.bob.generator_blocks().iter().map(|f| kron(&ia, f)).collect(),
                )
            }
            Flavor::Commuting { .. } => (
                self.alice.generator_blocks().into_iter().cloned().collect(),
                self.bob.generator_blocks().into_iter().cloned().collect(),
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

/// Classical no-signalling table `p(a,b|x,y)`.
#[derive(Clone, Debug)]
pub struct NsCorrelation {
    pub x_count: usize,
    pub y_count: usize,
    pub a_count: usize,
    pub b_count: usize,
    p: Vec<f64>,
}

impl NsCorrelation {
    pub fn new(x_count: usize, y_count: usize, a_count: usize, b_count: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != x_count * y_count * a_count * b_count {
            return Err(Error::Dimension(format!(
                "ns table has {} entries, shape needs {}",
                p.len(),
                x_count * y_count * a_count * b_count
            )));
        }
        Ok(Self { x_count, y_count, a_count, b_count, p })
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.y_count + y) * self.a_count + a) * self.b_count + b
    }

    pub fn value(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.idx(x, y, a, b)]
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    /// Alice marginal `p(a|x)` computed at `y = 0` (certified y-independent
    /// by [`NsCorrelation::validate`]).
    pub fn marginal_a(&self, x: usize, a: usize) -> f64 {
        (0..self.b_count).map(|b| self.value(x, 0, a, b)).sum()
    }

    /// Bob marginal `p(b|y)` computed at `x = 0`.
    pub fn marginal_b(&self, y: usize, b: usize) -> f64 {
        (0..self.a_count).map(|a| self.value(0, y, a, b)).sum()
    }

    /// Nonnegativity, per-pair normalization, and the marginal
    /// no-signalling equalities.
    pub fn validate(&self, tol: f64) -> Verdict {
        let mut checks = Checks::default();
        let neg = self.p.iter().copied().fold(0.0f64, |m, v| m.max(-v));
        checks.push("negativity", neg, tol);
        for x in 0..self.x_count {
            for y in 0..self.y_count {
                let s: f64 = (0..self.a_count)
                    .flat_map(|a| (0..self.b_count).map(move |b| (a, b)))
                    .map(|(a, b)| self.value(x, y, a, b))
                    .sum();
                checks.push(format!("normalization ({x},{y})"), (s - 1.0).abs(), tol);
            }
        }
        for x in 0..self.x_count {
            for a in 0..self.a_count {
                let sums: Vec<f64> = (0..self.y_count)
                    .map(|y| (0..self.b_count).map(|b| self.value(x, y, a, b)).sum())
                    .collect();
                for (y, s) in sums.iter().enumerate().skip(1) {
                    checks.push(
                        format!("alice marginal ({x},{a}) at y={y}"),
                        (s - sums[0]).abs(),
                        tol,
                    );
                }
            }
        }
        for y in 0..self.y_count {
            for b in 0..self.b_count {
                let sums: Vec<f64> = (0..self.x_count)
                    .map(|x| (0..self.a_count).map(|a| self.value(x, y, a, b)).sum())
                    .collect();
                for (x, s) in sums.iter().enumerate().skip(1) {
                    checks.push(
                        format!("bob marginal ({y},{b}) at x={x}"),
                        (s - sums[0]).abs(),
                        tol,
                    );
                }
            }
        }
        checks.verdict()
    }

    /// Synchronicity flag: square input/output alphabets and
    /// `p(a,b|x,x) ≤ tol` for all `a ≠ b`.
    pub fn is_synchronous(&self, tol: f64) -> bool {
        if self.x_count != self.y_count || self.a_count != self.b_count {
            return false;
        }
        (0..self.x_count).all(|x| {
            (0..self.a_count).all(|a| {
                (0..self.b_count).all(|b| a == b || self.value(x, x, a, b) <= tol)
            })
        })
    }
}

/// Quantum no-signalling correlation: the tensor
/// `Γ[x][x'][y][y'][a][a'][b][b']` of a linear map
/// `M_X ⊗ M_Y → M_A ⊗ M_B` on matrix units.
#[derive(Clone, Debug)]
pub struct QnsCorrelation {
    pub x_count: usize,
    pub y_count: usize,
    pub a_count: usize,
    pub b_count: usize,
    g: Vec<C64>,
}

impl QnsCorrelation {
    pub fn new(
        x_count: usize,
        y_count: usize,
        a_count: usize,
        b_count: usize,
        g: Vec<C64>,
    ) -> Result<Self> {
        let n = x_count * x_count * y_count * y_count * a_count * a_count * b_count * b_count;
        if g.len() != n {
            return Err(Error::Dimension(format!(
                "qns tensor has {} entries, shape needs {n}",
                g.len()
            )));
        }
        Ok(Self { x_count, y_count, a_count, b_count, g })
    }

    pub fn zeros(x_count: usize, y_count: usize, a_count: usize, b_count: usize) -> Self {
        let n = x_count * x_count * y_count * y_count * a_count * a_count * b_count * b_count;
        Self { x_count, y_count, a_count, b_count, g: vec![C64::new(0.0, 0.0); n] }
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn idx(&self, x: usize, xp: usize, y: usize, yp: usize, a: usize, ap: usize, b: usize, bp: usize) -> usize {
        (((((((x * self.x_count + xp) * self.y_count + y) * self.y_count + yp) * self.a_count
            + a)
            * self.a_count
            + ap)
            * self.b_count
            + b)
            * self.b_count)
            + bp
    }

    #[allow(clippy::too_many_arguments)]
    pub fn value(&self, x: usize, xp: usize, y: usize, yp: usize, a: usize, ap: usize, b: usize, bp: usize) -> C64 {
        self.g[self.idx(x, xp, y, yp, a, ap, b, bp)]
    }

    #[allow(clippy::too_many_arguments)]
    pub fn set(&mut self, x: usize, xp: usize, y: usize, yp: usize, a: usize, ap: usize, b: usize, bp: usize, v: C64) {
        let i = self.idx(x, xp, y, yp, a, ap, b, bp);
        self.g[i] = v;
    }

    /// The classical diagonal `p(a,b|x,y) = Re Γ[x][x][y][y][a][a][b][b]`.
    pub fn diagonal_ns(&self) -> Result<NsCorrelation> {
        let mut p = Vec::with_capacity(self.x_count * self.y_count * self.a_count * self.b_count);
        for x in 0..self.x_count {
            for y in 0..self.y_count {
                for a in 0..self.a_count {
                    for b in 0..self.b_count {
                        p.push(self.value(x, x, y, y, a, a, b, b).re);
                    }
                }
            }
        }
        NsCorrelation::new(self.x_count, self.y_count, self.a_count, self.b_count, p)
    }

    /// Complete positivity, operator no-signalling, and trace preservation.
    ///
    /// Complete positivity is certified on the Choi reshuffle
    /// `C[(x,y,a,b),(x',y',a',b')] = Γ[x][x'][y][y'][a][a'][b][b']`. Rather
    /// than eigensolving the full matrix, rows with negligible diagonal are
    /// checked to be entirely negligible (forced by positivity) and the
    /// surviving support block is eigensolved — exact for the diagonal
    /// block patterns produced by unitary models.
    pub fn validate(&self, tol: f64) -> Result<Verdict> {
        let mut checks = Checks::default();
        let scale = self.g.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
        let cut = tol * scale;
        let (xc, yc, ac, bc) = (self.x_count, self.y_count, self.a_count, self.b_count);
        let rows = xc * yc * ac * bc;
        let row_tuple = |r: usize| {
            let b = r % bc;
            let a = (r / bc) % ac;
            let y = (r / (bc * ac)) % yc;
            let x = r / (bc * ac * yc);
            (x, y, a, b)
        };
        // Support detection from the Choi diagonal.
        let mut support = Vec::new();
        for r in 0..rows {
            let (x, y, a, b) = row_tuple(r);
            let d = self.value(x, x, y, y, a, a, b, b);
            checks.push(format!("choi diagonal real at ({x},{y},{a},{b})"), d.im.abs(), cut);
            checks.push(format!("choi diagonal nonnegative at ({x},{y},{a},{b})"), (-d.re).max(0.0), cut);
            if d.re > cut {
                support.push(r);
            }
        }
        let mut leak = 0.0f64;
        let in_support: Vec<bool> = {
            let mut v = vec![false; rows];
            for &r in &support {
                v[r] = true;
            }
            v
        };
        let mut block = CMatrix::zeros(support.len(), support.len());
        let pos = |r: usize| support.binary_search(&r).ok();
        for r in 0..rows {
            let (x, y, a, b) = row_tuple(r);
            for rp in 0..rows {
                let (xp, yp, ap, bp) = row_tuple(rp);
                let v = self.value(x, xp, y, yp, a, ap, b, bp);
                match (pos(r), pos(rp)) {
                    (Some(i), Some(j)) => block.set(i, j, v),
                    _ => {
                        if !in_support[r] || !in_support[rp] {
                            leak = leak.max(v.norm());
                        }
                    }
                }
            }
        }
        // Positivity forces |C[r,r']|² ≤ C[r,r]·C[r',r'], so off-support
        // entries can be at most sqrt(cut·scale).
        checks.push("choi positivity (off-support leak)", leak, (cut * scale).sqrt());
        checks.push("choi hermitian", block.herm_residual(), cut);
        if block.herm_residual() <= cut {
            let sym = block.add(&block.dagger()).scale(cr(0.5));
            let min = herm_eig(&sym)?.min_eigenvalue();
            checks.push("choi positive", (-min).max(0.0), cut);
        }
        // Operator no-signalling: the Alice-marginal Σ_a Γ[x][x'][··][a][a][··]
        // vanishes for x ≠ x' and is x-independent on the diagonal.
        let zero = C64::new(0.0, 0.0);
        for y in 0..yc {
            for yp in 0..yc {
                for b in 0..bc {
                    for bp in 0..bc {
                        let diag: Vec<C64> = (0..xc)
                            .map(|x| (0..ac).map(|a| self.value(x, x, y, yp, a, a, b, bp)).sum())
                            .collect();
                        for x in 1..xc {
                            checks.push(
                                format!("alice marginal x-dependence at ({y},{yp},{b},{bp})"),
                                (diag[x] - diag[0]).norm(),
                                cut,
                            );
                        }
                        for x in 0..xc {
                            for xp in 0..xc {
                                if x == xp {
                                    continue;
                                }
                                let s: C64 =
                                    (0..ac).map(|a| self.value(x, xp, y, yp, a, a, b, bp)).sum();
                                checks.push(
                                    format!("alice marginal off-diagonal ({x},{xp})"),
                                    (s - zero).norm(),
                                    cut,
                                );
                            }
                        }
                    }
                }
            }
        }
        for x in 0..xc {
            for xp in 0..xc {
                for a in 0..ac {
                    for ap in 0..ac {
                        let diag: Vec<C64> = (0..yc)
                            .map(|y| (0..bc).map(|b| self.value(x, xp, y, y, a, ap, b, b)).sum())
                            .collect();
                        for y in 1..yc {
                            checks.push(
                                format!("bob marginal y-dependence at ({x},{xp},{a},{ap})"),
                                (diag[y] - diag[0]).norm(),
                                cut,
                            );
                        }
                        for y in 0..yc {
                            for yp in 0..yc {
                                if y == yp {
                                    continue;
                                }
                                let s: C64 =
                                    (0..bc).map(|b| self.value(x, xp, y, yp, a, ap, b, b)).sum();
                                checks.push(
                                    format!("bob marginal off-diagonal ({y},{yp})"),
                                    (s - zero).norm(),
                                    cut,
                                );
                            }
                        }
                    }
                }
            }
        }
        // Trace preservation.
        for x in 0..xc {
            for xp in 0..xc {
                for y in 0..yc {
                    for yp in 0..yc {
                        let s: C64 = (0..ac)
                            .flat_map(|a| (0..bc).map(move |b| (a, b)))
                            .map(|(a, b)| self.value(x, xp, y, yp, a, a, b, b))
                            .sum();
                        let target = if x == xp && y == yp { cr(1.0) } else { zero };
                        checks.push(
                            format!("trace preservation ({x},{xp},{y},{yp})"),
                            (s - target).norm(),
                            cut,
                        );
                    }
                }
            }
        }
        Ok(checks.verdict())
    }
}

/// Classical-input quantum no-signalling correlation
/// `Γ[x][y][a][a'][b][b']`: for each input pair a state on `M_d ⊗ M_d`.
#[derive(Clone, Debug)]
pub struct CqnsCorrelation {
    pub x_count: usize,
    pub y_count: usize,
    pub d: usize,
    g: Vec<C64>,
}

impl CqnsCorrelation {
    pub fn new(x_count: usize, y_count: usize, d: usize, g: Vec<C64>) -> Result<Self> {
        let n = x_count * y_count * d * d * d * d;
        if g.len() != n {
            return Err(Error::Dimension(format!(
                "cqns tensor has {} entries, shape needs {n}",
                g.len()
            )));
        }
        Ok(Self { x_count, y_count, d, g })
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, a: usize, ap: usize, b: usize, bp: usize) -> usize {
        ((((x * self.y_count + y) * self.d + a) * self.d + ap) * self.d + b) * self.d + bp
    }

    pub fn value(&self, x: usize, y: usize, a: usize, ap: usize, b: usize, bp: usize) -> C64 {
        self.g[self.idx(x, y, a, ap, b, bp)]
    }

    pub fn set(&mut self, x: usize, y: usize, a: usize, ap: usize, b: usize, bp: usize, v: C64) {
        let i = self.idx(x, y, a, ap, b, bp);
        self.g[i] = v;
    }

    /// The output state `Γ(ε_{x,x} ⊗ ε_{y,y})` as a `d² x d²` matrix with
    /// row index `a·d + b`.
    pub fn output_state(&self, x: usize, y: usize) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d * d, d * d, |r, c| {
            self.value(x, y, r / d, c / d, r % d, c % d)
        })
    }

    /// Per-input positivity and unit trace, plus the classical-input
    /// no-signalling marginal equalities.
    pub fn validate(&self, tol: f64) -> Result<Verdict> {
        let mut checks = Checks::default();
        let scale = self.g.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
        let cut = tol * scale;
        let d = self.d;
        for x in 0..self.x_count {
            for y in 0..self.y_count {
                let s = self.output_state(x, y);
                checks.push(format!("output state ({x},{y}) hermitian"), s.herm_residual(), cut);
                if s.herm_residual() <= cut {
                    let min = herm_eig(&s.add(&s.dagger()).scale(cr(0.5)))?.min_eigenvalue();
                    checks.push(format!("output state ({x},{y}) positive"), (-min).max(0.0), cut);
                }
                checks.push(
                    format!("output state ({x},{y}) trace"),
                    (s.trace() - cr(1.0)).norm(),
                    cut,
                );
            }
        }
        // Alice marginal Σ_b Γ[x][y][a][a'][b][b] must be y-independent.
        for x in 0..self.x_count {
            for a in 0..d {
                for ap in 0..d {
                    let sums: Vec<C64> = (0..self.y_count)
                        .map(|y| (0..d).map(|b| self.value(x, y, a, ap, b, b)).sum())
                        .collect();
                    for (y, s) in sums.iter().enumerate().skip(1) {
                        checks.push(
                            format!("alice marginal ({x},{a},{ap}) at y={y}"),
                            (*s - sums[0]).norm(),
                            cut,
                        );
                    }
                }
            }
        }
        for y in 0..self.y_count {
            for b in 0..d {
                for bp in 0..d {
                    let sums: Vec<C64> = (0..self.x_count)
                        .map(|x| (0..d).map(|a| self.value(x, y, a, a, b, bp)).sum())
                        .collect();
                    for (x, s) in sums.iter().enumerate().skip(1) {
                        checks.push(
                            format!("bob marginal ({y},{b},{bp}) at x={x}"),
                            (*s - sums[0]).norm(),
                            cut,
                        );
                    }
                }
            }
        }
        Ok(checks.verdict())
    }
}

/// A correlation of any of the three kinds handled by the crate.
#[derive(Clone, Debug)]
pub enum Correlation {
    Ns(NsCorrelation),
    Qns(QnsCorrelation),
    Cqns(CqnsCorrelation),
}

/// Classical correlation `p(a,b|x,y)` of a valid POVM/PVM model, with the
/// no-signalling invariants certified.
pub fn correlation_ns(m: &Model) -> Result<NsCorrelation> {
    correlation_ns_tol(m, crate::DEFAULT_TOL)
}

/// [`correlation_ns`] with an explicit tolerance for the certification.
pub fn correlation_ns_tol(m: &Model, tol: f64) -> Result<NsCorrelation> {
    if !m.alice.kind().is_flat() || !m.bob.kind().is_flat() {
        return Err(Error::Invalid(
            "classical correlation needs POVM/PVM families; use correlation_qns for SOMs".into(),
        ));
    }
    m.require_valid(tol)?;
    let (xc, ac) = (m.alice.x_count(), m.alice.a_count());
    let (yc, bc) = (m.bob.x_count(), m.bob.a_count());
    let mut p = Vec::with_capacity(xc * yc * ac * bc);
    for x in 0..xc {
        for y in 0..yc {
            for a in 0..ac {
                for b in 0..bc {
                    p.push(m.pair_expectation(m.alice.flat_block(x, a), m.bob.flat_block(y, b)).re);
                }
            }
        }
    }
    let out = NsCorrelation::new(xc, yc, ac, bc, p)?;
    out.validate(10.0 * tol).into_result()?;
    Ok(out)
}

/// Quantum no-signalling correlation
/// `Γ(ε_{x,x'} ⊗ ε_{y,y'}) = Σ ⟨E_{x,x',a,a'} F_{y,y',b,b'} ξ, ξ⟩ ε ⊗ ε`
/// of a valid SOM/USOM model, with the QNS invariants certified.
pub fn correlation_qns(m: &Model) -> Result<QnsCorrelation> {
    correlation_qns_tol(m, crate::DEFAULT_TOL)
}

/// [`correlation_qns`] with an explicit tolerance for the certification.
pub fn correlation_qns_tol(m: &Model, tol: f64) -> Result<QnsCorrelation> {
    if m.alice.kind().is_flat() || m.bob.kind().is_flat() {
        return Err(Error::Invalid("quantum correlation needs SOM/USOM families".into()));
    }
    m.require_valid(tol)?;
    let (xc, ac) = (m.alice.x_count(), m.alice.a_count());
    let (yc, bc) = (m.bob.x_count(), m.bob.a_count());
    let mut out = QnsCorrelation::zeros(xc, yc, ac, bc);
    for x in 0..xc {
        for xp in 0..xc {
            for a in 0..ac {
                for ap in 0..ac {
                    let e = m.alice.som_block(x, xp, a, ap);
                    if e.norm() == 0.0 {
                        continue;
                    }
                    for y in 0..yc {
                        for yp in 0..yc {
                            for b in 0..bc {
                                for bp in 0..bc {
                                    let f = m.bob.som_block(y, yp, b, bp);
                                    if f.norm() == 0.0 {
                                        continue;
                                    }
                                    out.set(x, xp, y, yp, a, ap, b, bp, m.pair_expectation(e, f));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.validate(10.0 * tol)?.into_result()?;
    Ok(out)
}

/// Lift of a classical correlation to a quantum no-signalling one:
/// `Γ_p[x][x'][y][y'][a][a'][b][b'] = δ_{x,x'}δ_{y,y'}δ_{a,a'}δ_{b,b'} p(a,b|x,y)`.
pub fn lift_classical(p: &NsCorrelation) -> Result<QnsCorrelation> {
    p.validate(crate::DEFAULT_TOL).into_result()?;
    let mut out = QnsCorrelation::zeros(p.x_count, p.y_count, p.a_count, p.b_count);
    for x in 0..p.x_count {
        for y in 0..p.y_count {
            for a in 0..p.a_count {
                for b in 0..p.b_count {
                    out.set(x, x, y, y, a, a, b, b, cr(p.value(x, y, a, b)));
                }
            }
        }
    }
    out.validate(10.0 * crate::DEFAULT_TOL)?.into_result()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Support projections and reduced models
// ---------------------------------------------------------------------------

/// Support projections of the state with respect to the two local algebras,
/// the derived flags, and the reduced model.
#[derive(Clone, Debug)]
pub struct SupportData {
    pub eps_a: CMatrix,
    pub eps_b: CMatrix,
    pub full_rank: bool,
    pub centrally_supported: bool,
    pub reduced: Model,
}

/// Orthonormalizes `vectors` (columns) by modified Gram-Schmidt, dropping
/// near-dependent entries; returns the surviving columns.
pub(crate) fn orthonormal_span(vectors: &[CMatrix], drop_tol: f64) -> Vec<CMatrix> {
    let mut basis: Vec<CMatrix> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let proj = w.inner(b);
                w = w.sub(&b.scale(proj));
            }
        }
        let n = w.norm();
        if n > drop_tol {
            basis.push(w.scale(cr(1.0 / n)));
        }
    }
    basis
}

/// Dimension of the span of the word algebra generated by `gens` (with
/// identity), built layer by layer up to `max_word_len`. Errors with
/// [`Error::NotConverged`] if the span is still growing at the bound.
fn word_algebra_dim(gens: &[CMatrix], dim: usize, max_word_len: usize) -> Result<usize> {
    let drop_tol = 1e-9;
    let mut basis = orthonormal_span(&[CMatrix::identity(dim)], drop_tol);
    let mut frontier: Vec<CMatrix> = basis.clone();
    for _len in 1..=max_word_len {
        let mut new_frontier = Vec::new();
        for g in gens {
            for b in &frontier {
                let prod = g.mul(b);
                let mut w = prod;
                for e in basis.iter().chain(new_frontier.iter()) {
                    let proj = w.inner(e);
                    w = w.sub(&e.scale(proj));
                }
                let n = w.norm();
                if n > drop_tol {
                    new_frontier.push(w.scale(cr(1.0 / n)));
                }
            }
        }
        if new_frontier.is_empty() {
            return Ok(basis.len());
        }
        basis.extend(new_frontier.clone());
        frontier = new_frontier;
    }
    Err(Error::NotConverged {
        max_word_len,
        detail: format!("word algebra span still growing at dimension {}", basis.len()),
    })
}

/// Computes the support projections `ε_A`, `ε_B` (projections onto the
/// commutant orbits `A'ξ`, `B'ξ`), the full-rank and centrally-supported
/// flags, and the reduced model obtained by compressing with
/// `r = ε_A ε_B` (the state is unchanged, re-expressed in an orthonormal
/// basis of the support).
pub fn support_data(m: &Model, max_word_len: usize, tol: f64) -> Result<SupportData> {
    m.require_valid(tol)?;
    let dim = m.total_dim();
    let (gens_a, gens_b) = m.embedded_generators();
    let gens_a: Vec<CMatrix> = gens_a.into_iter().filter(|g| g.norm() > 0.0).collect();
    let gens_b: Vec<CMatrix> = gens_b.into_iter().filter(|g| g.norm() > 0.0).collect();

    // Closure of the word algebras (loud failure rather than silent
    // truncation; at finite dimension this always converges well before the
    // default bound).
    word_algebra_dim(&gens_a, dim, max_word_len)?;
    word_algebra_dim(&gens_b, dim, max_word_len)?;

    let support_projection = |gens: &[CMatrix]| -> Result<CMatrix> {
        let comm = commutant_basis(gens, dim, tol)?;
        let orbit: Vec<CMatrix> = comm.iter().map(|c| c.mul(&m.state)).collect();
        let basis = orthonormal_span(&orbit, 1e-9);
        let mut p = CMatrix::zeros(dim, dim);
        for q in &basis {
            p = p.add(&q.mul(&q.dagger()));
        }
        Ok(p)
    };
    let eps_a = support_projection(&gens_a)?;
    let eps_b = support_projection(&gens_b)?;

    let id = CMatrix::identity(dim);
    let full_rank = eps_a.dist(&id) < 0.5 && eps_b.dist(&id) < 0.5;
    let commutes = |p: &CMatrix, gens: &[CMatrix]| {
        gens.iter().all(|g| p.mul(g).dist(&g.mul(p)) <= 100.0 * tol * g.norm().max(1.0))
    };
    let centrally_supported = commutes(&eps_a, &gens_a) && commutes(&eps_b, &gens_b);

    // Reduced model on the range of r = ε_A ε_B.
    let r = eps_a.mul(&eps_b);
    let r = r.add(&r.dagger()).scale(cr(0.5));
    let eig = herm_eig(&r)?;
    let keep: Vec<usize> = (0..dim).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    let q = {
        let mut q = CMatrix::zeros(dim, keep.len());
        for (j, &k) in keep.iter().enumerate() {
            for i in 0..dim {
                q.set(i, j, eig.eigenvectors.at(i, k));
            }
        }
        q
    };
    let compress = |mat: &CMatrix| q.dagger().mul(mat).mul(&q);
    let (emb_a, emb_b) = m.embedded_generators();
    let red_alice = weaken_to_valid(remap_family(&m.alice, &emb_a, &compress), tol)?;
    let red_bob = weaken_to_valid(remap_family(&m.bob, &emb_b, &compress), tol)?;
    let red_state = {
        let s = q.dagger().mul(&m.state);
        let n = s.norm();
        s.scale(cr(1.0 / n))
    };
    let reduced = Model::new(
        Flavor::Commuting { dim_h: keep.len() },
        red_alice,
        red_bob,
        red_state,
    )?;
    Ok(SupportData { eps_a, eps_b, full_rank, centrally_supported, reduced })
}

/// Subspace compression preserves positivity and completeness but can break
/// projectivity and unistochasticity; when that happens the family is
/// re-declared under the weaker class.
fn weaken_to_valid(fam: MeasurementFamily, tol: f64) -> Result<MeasurementFamily> {
    if validate(&fam, tol)?.is_valid() {
        return Ok(fam);
    }
    let weaker = match fam.kind() {
        FamilyKind::Pvm => FamilyKind::Povm,
        FamilyKind::Usom => FamilyKind::Som,
        k => k,
    };
    fam.rekind(weaker)
}

/// Rebuilds a family from transformed copies of its embedded generator
/// blocks, preserving kind and index structure.
fn remap_family(
    fam: &MeasurementFamily,
    embedded: &[CMatrix],
    f: &impl Fn(&CMatrix) -> CMatrix,
) -> MeasurementFamily {
    let mut it = embedded.iter();
    fam.map_blocks(|_| f(it.next().expect("generator count")))
}

// ---------------------------------------------------------------------------
// Commuting-to-tensor splitting
// ---------------------------------------------------------------------------

/// One component of the finite-dimensional algebra decomposition
/// `H ≅ ⊕_i H_i ⊗ K_i`: `q` has orthonormal columns spanning the component
/// and `q† g q = π_i(g) ⊗ I_m` for every generator `g`.
#[derive(Clone, Debug)]
pub(crate) struct AlgebraComponent {
    pub q: CMatrix,
    pub irrep_dim: usize,
    pub multiplicity: usize,
}

pub(crate) fn random_herm_in_span(basis: &[CMatrix], rng: &mut impl Rng) -> CMatrix {
    let dim = basis[0].rows();
    let mut x = CMatrix::zeros(dim, dim);
    for b in basis {
        x = x.add(&b.scale(c(randn(rng), randn(rng))));
    }
    x.add(&x.dagger()).scale(cr(0.5))
}

/// Groups ascending eigenvalues into clusters separated by gaps larger than
/// `1e-6·max(1,|λ|)`; returns the column ranges of each cluster.
fn eigenvalue_groups(eigenvalues: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < eigenvalues.len() {
        let mut j = i;
        while j + 1 < eigenvalues.len()
            && eigenvalues[j + 1] - eigenvalues[j] < 1e-6 * eigenvalues[j].abs().max(1.0)
        {
            j += 1;
        }
        groups.push(i..j + 1);
        i = j + 1;
    }
    groups
}

fn columns(m: &CMatrix, range: std::ops::Range<usize>) -> CMatrix {
    CMatrix::from_fn(m.rows(), range.len(), |i, j| m.at(i, range.start + j))
}

/// Decomposes the *-algebra generated by `gens` on `C^dim` into isotypic
/// components `H_i ⊗ K_i`. Within each component, copies of the irreducible
/// summand are identified by eigenspaces of a random commutant element and
/// connected by polar-corrected matrix units; random draws are deterministic
/// from the caller's RNG and retried on accidental degeneracy.
pub(crate) fn decompose_algebra(
    gens: &[CMatrix],
    dim: usize,
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> Result<Vec<AlgebraComponent>> {
    let a_prime = commutant_basis(gens, dim, tol)?;
    let mut center_gens = gens.to_vec();
    center_gens.extend(a_prime.iter().cloned());
    let center = commutant_basis(&center_gens, dim, tol)?;

    const ATTEMPTS: usize = 8;
    'outer: for _attempt in 0..ATTEMPTS {
        let zc = random_herm_in_span(&center, rng);
        let eig = herm_eig(&zc)?;
        let comps = eigenvalue_groups(&eig.eigenvalues);
        if comps.len() != center.len() {
            continue; // accidental eigenvalue collision between components
        }
        let mut out = Vec::new();
        for comp in comps {
            let s = columns(&eig.eigenvectors, comp);
            match split_component(gens, &a_prime, &s, rng) {
                Some(component) => out.push(component),
                None => continue 'outer,
            }
        }
        return Ok(out);
    }
    Err(Error::Invalid(
        "algebra decomposition: random draws kept hitting degenerate splits".into(),
    ))
}

/// Splits one isotypic component spanned by the columns of `s` into
/// `irrep ⊗ multiplicity` form. Returns `None` on a degenerate random draw
/// (caller retries with fresh draws).
fn split_component(
    _gens: &[CMatrix],
    a_prime: &[CMatrix],
    s: &CMatrix,
    rng: &mut ChaCha8Rng,
) -> Option<AlgebraComponent> {
    let sdim = s.cols();
    let cr_mat = random_herm_in_span(a_prime, rng);
    let restricted = s.dagger().mul(&cr_mat).mul(s);
    let eig = herm_eig(&restricted).ok()?;
    let groups = eigenvalue_groups(&eig.eigenvalues);
    let d = groups[0].len();
    if groups.iter().any(|g| g.len() != d) || d * groups.len() != sdim {
        return None;
    }
    let mult = groups.len();
    let copies: Vec<CMatrix> = groups
        .into_iter()
        .map(|g| columns(&eig.eigenvectors, g))
        .collect();
    // Matrix units connecting copy 0 to copy t: polar factor of the
    // compressed core of a random commutant element.
    let r = s.dagger().mul(&random_herm_in_span(a_prime, rng)).mul(s);
    let mut connectors = Vec::with_capacity(mult);
    for g_t in &copies {
        let core = g_t.dagger().mul(&r).mul(&copies[0]);
        match crate::matcore::polar_unitary(&core, 1e-8) {
            Ok(u) => connectors.push(g_t.mul(&u)),
            Err(_) => return None,
        }
    }
    // Column (a, t) of the component basis is connector_t applied to the
    // a-th fiber vector; ordering (a slow, t fast) yields π ⊗ I_mult.
    let dim = s.rows();
    let mut q = CMatrix::zeros(dim, d * mult);
    for (t, w_t) in connectors.iter().enumerate() {
        for a in 0..d {
            let col = s.mul(&w_t.column(a));
            for i in 0..dim {
                q.set(i, a * mult + t, col.at(i, 0));
            }
        }
    }
    if q.dagger().mul(&q).dist(&CMatrix::identity(d * mult)) > 1e-8 {
        return None;
    }
    Some(AlgebraComponent { q, irrep_dim: d, multiplicity: mult })
}

/// Extracts the `d x d` factor of a `d·m`-dimensional block assumed to be of
/// the form `π ⊗ I_m`, together with the structure residual.
pub(crate) fn factor_out_multiplicity(blk: &CMatrix, d: usize, m: usize) -> (CMatrix, f64) {
    let pi = CMatrix::from_fn(d, d, |a, b| {
        (0..m).map(|t| blk.at(a * m + t, b * m + t)).sum::<C64>() / cr(m as f64)
    });
    let residual = blk.dist(&kron(&pi, &CMatrix::identity(m)));
    (pi, residual)
}

/// Extracts the `m x m` factor of a block assumed to be `I_d ⊗ ρ`.
pub(crate) fn factor_out_irrep(blk: &CMatrix, d: usize, m: usize) -> (CMatrix, f64) {
    let rho = CMatrix::from_fn(m, m, |mu, nu| {
        (0..d).map(|a| blk.at(a * m + mu, a * m + nu)).sum::<C64>() / cr(d as f64)
    });
    let residual = blk.dist(&kron(&CMatrix::identity(d), &rho));
    (rho, residual)
}

/// Exhibits a valid commuting model as a convex combination of tensor-split
/// blocks: the Alice algebra decomposes `H ≅ ⊕_i H_i ⊗ K_i` with Alice
/// blocks `π_i ⊗ I` and Bob blocks `I ⊗ ρ_i`; weights are `λ_i = ‖ξ_i‖²`.
/// Components carrying weight below `1e-12` are omitted (their states are
/// undefined and they contribute nothing to the convex combination).
/// Deterministic: internal random draws are seeded with 0.
pub fn split_commuting(m: &Model, tol: f64) -> Result<Vec<(f64, Model)>> {
    split_commuting_with_seed(m, tol, 0)
}

/// [`split_commuting`] with an explicit seed for the internal random draws.
pub fn split_commuting_with_seed(m: &Model, tol: f64, seed: u64) -> Result<Vec<(f64, Model)>> {
    let Flavor::Commuting { dim_h } = m.flavor else {
        return Err(Error::Invalid("split_commuting expects a commuting-flavor model".into()));
    };
    m.require_valid(tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens: Vec<CMatrix> = m
        .alice
        .generator_blocks()
        .into_iter()
        .filter(|g| g.norm() > 0.0)
        .cloned()
        .collect();
    let comps = decompose_algebra(&gens, dim_h, &mut rng, tol)?;
    let mut out = Vec::new();
    for comp in &comps {
        let (d, mult) = (comp.irrep_dim, comp.multiplicity);
        let xi_i = comp.q.dagger().mul(&m.state);
        let weight = xi_i.norm().powi(2);
        let mut worst = 0.0f64;
        let alice = m.alice.map_blocks(|e| {
            let blk = comp.q.dagger().mul(e).mul(&comp.q);
            let (pi, res) = factor_out_multiplicity(&blk, d, mult);
            worst = worst.max(res);
            pi
        });
        let bob = m.bob.map_blocks(|f| {
            let blk = comp.q.dagger().mul(f).mul(&comp.q);
            let (rho, res) = factor_out_irrep(&blk, d, mult);
            worst = worst.max(res);
            rho
        });
        if worst > 1e5 * tol {
            return Err(Error::Violation {
                description: "commuting model does not split into tensor blocks".into(),
                magnitude: worst,
            });
        }
        if weight <= 1e-12 {
            continue;
        }
        let state = xi_i.scale(cr(1.0 / weight.sqrt()));
        out.push((
            weight,
            Model::new(Flavor::TensorSplit { dim_a: d, dim_b: mult }, alice, bob, state)?,
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Random model generators (used by randomized suites and the CLI's seeded
// construction commands).
// ---------------------------------------------------------------------------

/// Random SOM family with `x_count` inputs and `a_count` outcomes on local
/// dimension `h`, built as the Gram blocks of a Haar-random block isometry
/// with codomain block dimension `k` (requires `a_count·k ≥ x_count·h`).
pub fn random_som_family(
    x_count: usize,
    a_count: usize,
    h: usize,
    k: usize,
    rng: &mut impl Rng,
) -> MeasurementFamily {
    assert!(a_count * k >= x_count * h, "codomain too small for an isometry");
    let big_u = crate::matcore::random_unitary(a_count * k, rng);
    // first x_count·h columns form a block isometry V[a][x] (k x h)
    let v = |a: usize, x: usize| big_u.block(a * k, x * h, k, h);
    let blocks: Vec<Vec<Vec<Vec<CMatrix>>>> = (0..x_count)
        .map(|x| {
            (0..x_count)
                .map(|xp| {
                    (0..a_count)
                        .map(|a| {
                            (0..a_count)
                                .map(|ap| v(a, x).dagger().mul(&v(ap, xp)))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    MeasurementFamily::som(blocks).expect("constructed shape")
}

/// Random PVM family with binary outcomes on `C^dim`: each input measures a
/// Haar-random rank-split projection pair.
pub fn random_binary_pvm(x_count: usize, dim: usize, rng: &mut impl Rng) -> MeasurementFamily {
    let blocks = (0..x_count)
        .map(|_| {
            let u = crate::matcore::random_unitary(dim, rng);
            let rank = 1 + rng.gen_range(0..dim.max(2) - 1);
            let p = CMatrix::from_fn(dim, dim, |i, j| {
                (0..rank).map(|k| u.at(i, k) * u.at(j, k).conj()).sum()
            });
            vec![p.clone(), CMatrix::identity(dim).sub(&p)]
        })
        .collect();
    MeasurementFamily::pvm(blocks).expect("constructed shape")
}

/// Conjugates a tensor-split model by local unitaries `u_a ⊗ u_b`
/// (operators and state), leaving its correlation unchanged.
pub fn conjugate_local(m: &Model, u_a: &CMatrix, u_b: &CMatrix) -> Result<Model> {
    let Flavor::TensorSplit { .. } = m.flavor else {
        return Err(Error::Invalid("conjugate_local expects a tensor-split model".into()));
    };
    let alice = m.alice.map_blocks(|e| u_a.mul(e).mul(&u_a.dagger()));
    let bob = m.bob.map_blocks(|f| u_b.mul(f).mul(&u_b.dagger()));
    let state = kron(u_a, u_b).mul(&m.state);
    Model::new(m.flavor, alice, bob, state)
}

/// Random commuting model assembled as a direct sum of tensor-split blocks
/// (binary PVM families on each side) conjugated by a global random
/// unitary, with a random shared state.
pub fn random_commuting_model(block_dims: &[(usize, usize)], rng: &mut impl Rng) -> Model {
    let x_count = 2;
    let total: usize = block_dims.iter().map(|(d, k)| d * k).sum();
    let mut alice_blocks = vec![vec![CMatrix::zeros(total, total); 2]; x_count];
    let mut bob_blocks = vec![vec![CMatrix::zeros(total, total); 2]; x_count];
    let mut off = 0;
    for &(d, k) in block_dims {
        let fam_a = random_binary_pvm(x_count, d, rng);
        let fam_b = random_binary_pvm(x_count, k, rng);
        for x in 0..x_count {
            for a in 0..2 {
                let ea = kron(fam_a.flat_block(x, a), &CMatrix::identity(k));
                let fb = kron(&CMatrix::identity(d), fam_b.flat_block(x, a));
                alice_blocks[x][a].insert(off, off, &ea);
                bob_blocks[x][a].insert(off, off, &fb);
            }
        }
        off += d * k;
    }
    let u = crate::matcore::random_unitary(total, rng);
    let conj = |m: &CMatrix| u.mul(m).mul(&u.dagger());
    let alice = MeasurementFamily::pvm(
        alice_blocks.iter().map(|row| row.iter().map(conj).collect()).collect(),
    )
    .expect("constructed shape");
    let bob = MeasurementFamily::pvm(
        bob_blocks.iter().map(|row| row.iter().map(conj).collect()).collect(),
    )
    .expect("constructed shape");
    let state = u.mul(&crate::matcore::random_state(total, rng));
    Model::new(Flavor::Commuting { dim_h: total }, alice, bob, state).expect("constructed shape")
}

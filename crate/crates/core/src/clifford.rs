//! Clifford algebra representations and the associated correlation
//! machinery: anticommuting generator families, Clifford correlations
//! (tracial and state-induced), the entanglement witness
//! `n·I − Σ_x u_x ⊗ u_x`, and NPA-style moment matrices with the
//! anticommutation constraint set checked via `m_{e,e} − m_{w,w} = 1/8`.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::{c, cr, herm_eig, kron, random_gaussian, CMatrix};
use crate::models::{orthonormal_span, NsCorrelation, Verdict};

/// An irreducible family of `n` pairwise anticommuting Hermitian unitaries
/// on `C^{2^{n/2}}`.
#[derive(Clone, Debug)]
pub struct CliffordRep {
    n: usize,
    pub generators: Vec<CMatrix>,
}

impl CliffordRep {
    /// Number of generators.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Representation dimension `2^{n/2}`.
    pub fn dim(&self) -> usize {
        self.generators[0].rows()
    }

    /// Worst residuals `(max ‖u_x² − I‖, max ‖u_xu_y + u_yu_x‖)` over the
    /// generator family.
    pub fn residuals(&self) -> (f64, f64) {
        let id = CMatrix::identity(self.dim());
        let mut sq = 0.0f64;
        let mut anti = 0.0f64;
        for (i, u) in self.generators.iter().enumerate() {
            sq = sq.max(u.mul(u).dist(&id));
            for v in &self.generators[i + 1..] {
                anti = anti.max(u.mul(v).add(&v.mul(u)).norm());
            }
        }
        (sq, anti)
    }

    /// Spectral projections `r_{x,a} = (I + (−1)^a u_x)/2` for all
    /// generators, indexed `[x][a]` with binary outcomes.
    pub fn projections(&self) -> Vec<Vec<CMatrix>> {
        let id = CMatrix::identity(self.dim());
        self.generators
            .iter()
            .map(|u| {
                vec![
                    id.add(u).scale(cr(0.5)),
                    id.sub(u).scale(cr(0.5)),
                ]
            })
            .collect()
    }
}

fn pauli_x() -> CMatrix {
    CMatrix::from_rows(&[vec![cr(0.0), cr(1.0)], vec![cr(1.0), cr(0.0)]]).expect("shape")
}

fn pauli_y() -> CMatrix {
    CMatrix::from_rows(&[vec![cr(0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), cr(0.0)]]).expect("shape")
}

fn pauli_z() -> CMatrix {
    CMatrix::from_rows(&[vec![cr(1.0), cr(0.0)], vec![cr(0.0), cr(-1.0)]]).expect("shape")
}

/// The concrete irreducible Clifford representation on `C^{2^{n/2}}`,
/// built from tensor chains `u_{2k−1} = Y^{⊗(k−1)} ⊗ X ⊗ I ⊗ …` and
/// `u_{2k} = Y^{⊗(k−1)} ⊗ Z ⊗ I ⊗ …` (so `n = 2` yields `{σ_x, σ_z}`).
/// Any anticommuting Hermitian unitary family of this size is unitarily
/// equivalent to it.
pub fn clifford_rep(n: usize) -> Result<CliffordRep> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Dimension(format!("generator count must be even and positive, got {n}")));
    }
    if n > 12 {
        return Err(Error::Dimension(format!("generator count {n} exceeds the size guard 12")));
    }
    let half = n / 2;
    let chain = |k: usize, mid: CMatrix| {
        let mut m = CMatrix::identity(1);
        for _ in 0..k {
            m = kron(&m, &pauli_y());
        }
        m = kron(&m, &mid);
        for _ in k + 1..half {
            m = kron(&m, &CMatrix::identity(2));
        }
        m
    };
    let mut generators = Vec::with_capacity(n);
    for k in 0..half {
        generators.push(chain(k, pauli_x()));
        generators.push(chain(k, pauli_z()));
    }
    Ok(CliffordRep { n, generators })
}

/// Residual `‖4pq + 4qp − 4p − 4q + 2I‖_F` of the quotient relation for a
/// pair of projections; it vanishes exactly when the symmetries `2p − I`
/// and `2q − I` anticommute.
pub fn quotient_relation_check(p: &CMatrix, q: &CMatrix) -> Result<f64> {
    for (name, m) in [("p", p), ("q", q)] {
        if m.rows() != m.cols() || m.rows() != p.rows() {
            return Err(Error::Dimension(format!("{name} must be square and match the other input")));
        }
        let herm = m.dist(&m.dagger());
        let idem = m.mul(m).dist(m);
        let res = herm.max(idem);
        if res > 100.0 * crate::DEFAULT_TOL * m.norm().max(1.0) {
            return Err(Error::Violation {
                description: format!("{name} is not a projection"),
                magnitude: res,
            });
        }
    }
    let id = CMatrix::identity(p.rows());
    let rel = p
        .mul(q)
        .add(&q.mul(p))
        .scale(cr(4.0))
        .sub(&p.scale(cr(4.0)))
        .sub(&q.scale(cr(4.0)))
        .add(&id.scale(cr(2.0)));
    Ok(rel.norm())
}

/// How a Clifford correlation is induced: from the normalized trace
/// (synchronous) or from a bipartite state on `C^{2^{n/2}} ⊗ C^{2^{n/2}}`.
#[derive(Clone, Debug)]
pub enum CorrelationMode {
    Canonical,
    State(CMatrix),
}

/// The Clifford correlation of `n` binary inputs per party with outcome
/// projections `r_{x,a} = (I + (−1)^a u_x)/2`: entries
/// `tr(r_{x,a} r_{y,b})/d` in canonical mode, `⟨(r_{x,a} ⊗ r_{y,b})ψ, ψ⟩`
/// in state mode.
pub fn clifford_correlation(n: usize, mode: &CorrelationMode) -> Result<NsCorrelation> {
    let rep = clifford_rep(n)?;
    let d = rep.dim();
    let r = rep.projections();
    let mut p = vec![0.0; n * n * 4];
    match mode {
        CorrelationMode::Canonical => {
            for x in 0..n {
                for y in 0..n {
                    for a in 0..2 {
                        for b in 0..2 {
                            let v = r[x][a].mul(&r[y][b]).trace().re / d as f64;
                            p[((x * n + y) * 2 + a) * 2 + b] = v;
                        }
                    }
                }
            }
        }
        CorrelationMode::State(psi) => {
            if psi.rows() != d * d || psi.cols() != 1 {
                return Err(Error::Dimension(format!(
                    "state must be a column vector of length {}, got {}x{}",
                    d * d,
                    psi.rows(),
                    psi.cols()
                )));
            }
            if (psi.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!("state is not a unit vector (norm {})", psi.norm())));
            }
            // reshape ψ row-major to M so that ⟨(A⊗B)ψ, ψ⟩ = ⟨A M Bᵀ, M⟩_F
            let mut m = CMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    m.set(i, j, psi.at(i * d + j, 0));
                }
            }
            for x in 0..n {
                for y in 0..n {
                    for a in 0..2 {
                        for b in 0..2 {
                            let v = r[x][a].mul(&m).mul(&r[y][b].transpose()).inner(&m).re;
                            p[((x * n + y) * 2 + a) * 2 + b] = v;
                        }
                    }
                }
            }
        }
    }
    NsCorrelation::new(n, n, 2, 2, p)
}

/// Kernel data of the entanglement witness `n·I − Σ_x u_x ⊗ u_x`: the
/// dimension and an orthonormal basis of the zero eigenspace, plus the
/// smallest eigenvalue as a positivity certificate.
#[derive(Clone, Debug)]
pub struct WitnessKernel {
    pub kernel_dim: usize,
    /// Columns form an orthonormal basis of the kernel.
    pub basis: CMatrix,
    pub min_eigenvalue: f64,
}

/// Computes the kernel of `n·I − Σ_x u_x ⊗ u_x` and certifies positivity.
/// Small instances are eigendecomposed densely; for `n ≥ 6` the operator
/// is only touched through matrix-vector products (the summands
/// `I − u_x ⊗ u_x` are commuting projections scaled by 2, so the kernel is
/// the joint fixed space and the smallest eigenvalue is reachable by power
/// iteration on the reflected operator).
pub fn witness_kernel(n: usize) -> Result<WitnessKernel> {
    let rep = clifford_rep(n)?;
    let d = rep.dim();
    let dd = d * d;
    let tol = crate::DEFAULT_TOL;
    let kernel_cut = tol * n as f64;
    if dd <= 256 {
        let mut w = CMatrix::identity(dd).scale(cr(n as f64));
        for u in &rep.generators {
            w = w.sub(&kron(u, u));
        }
        let eig = herm_eig(&w)?;
        let min_eigenvalue = eig.min_eigenvalue();
        if min_eigenvalue < -kernel_cut {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        let kernel_dim = eig.eigenvalues.iter().filter(|l| l.abs() <= kernel_cut).count();
        let mut basis = CMatrix::zeros(dd, kernel_dim);
        for k in 0..kernel_dim {
            basis.insert(0, k, &eig.eigenvectors.column(k));
        }
        return Ok(WitnessKernel { kernel_dim, basis, min_eigenvalue });
    }
    // (u ⊗ u) v via the row-major reshape v ↦ M, (u ⊗ u)v = vec(u M uᵀ).
    let conjugate = |u: &CMatrix, v: &CMatrix| -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m.set(i, j, v.at(i * d + j, 0));
            }
        }
        let r = u.mul(&m).mul(&u.transpose());
        let mut out = CMatrix::zeros(dd, 1);
        for i in 0..d {
            for j in 0..d {
                out.set(i * d + j, 0, r.at(i, j));
            }
        }
        out
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // Kernel: joint fixed space of the commuting projections (I + u⊗u)/2.
    let mut fixed = Vec::new();
    for _ in 0..6 {
        let mut v = random_gaussian(dd, 1, &mut rng);
        for u in &rep.generators {
            v = v.add(&conjugate(u, &v)).scale(cr(0.5));
        }
        fixed.push(v);
    }
    let kernel_vecs = orthonormal_span(&fixed, 1e-6);
    let kernel_dim = kernel_vecs.len();
    let mut basis = CMatrix::zeros(dd, kernel_dim);
    for (k, v) in kernel_vecs.iter().enumerate() {
        basis.insert(0, k, v);
    }
    // Smallest eigenvalue via power iteration on 2n·I − W = n·I + Σ u⊗u,
    // whose top eigenvalue is 2n − λ_min(W); the spectral gap is ≥ 2.
    let apply_reflected = |v: &CMatrix| -> CMatrix {
        let mut out = v.scale(cr(n as f64));
        for u in &rep.generators {
            out = out.add(&conjugate(u, v));
        }
        out
    };
    let mut v = random_gaussian(dd, 1, &mut rng);
    v = v.scale(cr(1.0 / v.norm()));
    for _ in 0..250 {
        let w = apply_reflected(&v);
        v = w.scale(cr(1.0 / w.norm()));
    }
    let min_eigenvalue = 2.0 * n as f64 - apply_reflected(&v).inner(&v).re;
    if min_eigenvalue < -kernel_cut {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    Ok(WitnessKernel { kernel_dim, basis, min_eigenvalue })
}

/// A single generator letter of the free measurement algebra: `E(x, a)`
/// for Alice's projection `e_{x,a}`, `F(y, b)` for Bob's `f_{y,b}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    E(usize, usize),
    F(usize, usize),
}

/// A reduced word over the letters: `e`-letters commute past `f`-letters,
/// adjacent equal letters collapse (projectivity), and adjacent letters
/// with the same input but different outcomes annihilate the word. The
/// reduced form keeps the `e`-part left of the `f`-part.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Word {
    Zero,
    Reduced { e: Vec<(usize, usize)>, f: Vec<(usize, usize)> },
}

fn reduce_family(seq: &[(usize, usize)]) -> Option<Vec<(usize, usize)>> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &l in seq {
        if let Some(&last) = out.last() {
            if last == l {
                continue; // idempotent collapse
            }
            if last.0 == l.0 {
                return None; // orthogonal outcomes of the same input
            }
        }
        out.push(l);
    }
    Some(out)
}

impl Word {
    /// The empty word (algebra unit).
    pub fn identity() -> Self {
        Word::Reduced { e: Vec::new(), f: Vec::new() }
    }

    /// Reduces a letter sequence to normal form.
    pub fn from_letters(seq: &[Letter]) -> Self {
        let mut e = Vec::new();
        let mut f = Vec::new();
        for &l in seq {
            match l {
                Letter::E(x, a) => e.push((x, a)),
                Letter::F(y, b) => f.push((y, b)),
            }
        }
        match (reduce_family(&e), reduce_family(&f)) {
            (Some(e), Some(f)) => Word::Reduced { e, f },
            _ => Word::Zero,
        }
    }

    /// The adjoint word: each letter is self-adjoint, so both parts
    /// reverse.
    pub fn adjoint(&self) -> Self {
        match self {
            Word::Zero => Word::Zero,
            Word::Reduced { e, f } => Word::Reduced {
                e: e.iter().rev().copied().collect(),
                f: f.iter().rev().copied().collect(),
            },
        }
    }

    /// The reduced product `self · other`.
    pub fn concat(&self, other: &Self) -> Self {
        match (self, other) {
            (Word::Zero, _) | (_, Word::Zero) => Word::Zero,
            (Word::Reduced { e: e1, f: f1 }, Word::Reduced { e: e2, f: f2 }) => {
                let e: Vec<_> = e1.iter().chain(e2).copied().collect();
                let f: Vec<_> = f1.iter().chain(f2).copied().collect();
                match (reduce_family(&e), reduce_family(&f)) {
                    (Some(e), Some(f)) => Word::Reduced { e, f },
                    _ => Word::Zero,
                }
            }
        }
    }

    /// True for the empty word.
    pub fn is_identity(&self) -> bool {
        matches!(self, Word::Reduced { e, f } if e.is_empty() && f.is_empty())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Word::Zero => write!(out, "0"),
            Word::Reduced { e, f } => {
                if e.is_empty() && f.is_empty() {
                    return write!(out, "1");
                }
                for (x, a) in e {
                    write!(out, "e({x},{a})")?;
                }
                for (y, b) in f {
                    write!(out, "f({y},{b})")?;
                }
                Ok(())
            }
        }
    }
}

/// A moment matrix over an ordered word list: `entries[α, β] = s(β*α)` for
/// a state `s` determined by a correlation on short words and a supplied
/// completion elsewhere. Hermitian PSD with real diagonal in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub words: Vec<Word>,
    pub entries: CMatrix,
}

impl MomentMatrix {
    /// Looks up `m_{α,β}`; both words must be in the index.
    pub fn entry(&self, alpha: &Word, beta: &Word) -> Result<C64> {
        let pos = |w: &Word| {
            self.words
                .iter()
                .position(|v| v == w)
                .ok_or_else(|| Error::MissingWord { word: w.to_string() })
        };
        Ok(self.entries.at(pos(alpha)?, pos(beta)?))
    }
}

/// The level-1 word list of a binary correlation: the unit, all `e_{x,a}`,
/// and all `f_{y,b}`, lexicographically ordered.
pub fn level1_words(x_count: usize, y_count: usize) -> Vec<Word> {
    let mut words = vec![Word::identity()];
    for x in 0..x_count {
        for a in 0..2 {
            words.push(Word::from_letters(&[Letter::E(x, a)]));
        }
    }
    for y in 0..y_count {
        for b in 0..2 {
            words.push(Word::from_letters(&[Letter::F(y, b)]));
        }
    }
    words.sort();
    words
}

/// Word list for the anticommutation constraint set over the given input
/// labels: the unit, the outcome-0 projections `e_{x,0}`, and the ordered
/// pair words `w_{x,y} = e_{x,0} e_{y,0}`.
pub fn ac_words(labels: &[usize]) -> Vec<Word> {
    let mut words = vec![Word::identity()];
    for &x in labels {
        words.push(Word::from_letters(&[Letter::E(x, 0)]));
    }
    for &x in labels {
        for &y in labels {
            if x != y {
                words.push(Word::from_letters(&[Letter::E(x, 0), Letter::E(y, 0)]));
            }
        }
    }
    words.sort();
    words.dedup();
    words
}

/// Evaluates a word in a concrete projective family under the normalized
/// trace: the `e`-part multiplies in order, the `f`-part in reverse (the
/// right-multiplication convention of the tracial synchronous
/// construction), and the value is `tr(·)/d`.
pub fn word_trace_value(
    e_fam: &[Vec<CMatrix>],
    f_fam: &[Vec<CMatrix>],
    word: &Word,
) -> Result<C64> {
    let (e, f) = match word {
        Word::Zero => return Ok(cr(0.0)),
        Word::Reduced { e, f } => (e, f),
    };
    let d = e_fam
        .first()
        .and_then(|r| r.first())
        .map(|m| m.rows())
        .ok_or_else(|| Error::Dimension("empty projection family".into()))?;
    let mut acc = CMatrix::identity(d);
    for &(x, a) in e {
        let blk = e_fam
            .get(x)
            .and_then(|r| r.get(a))
            .ok_or_else(|| Error::Dimension(format!("letter e({x},{a}) outside the family")))?;
        acc = acc.mul(blk);
    }
    for &(y, b) in f.iter().rev() {
        let blk = f_fam
            .get(y)
            .and_then(|r| r.get(b))
            .ok_or_else(|| Error::Dimension(format!("letter f({y},{b}) outside the family")))?;
        acc = acc.mul(blk);
    }
    Ok(acc.trace() / cr(d as f64))
}

/// Completion entries for every pairwise product `β*α` of the given words,
/// evaluated in a concrete projective family under the normalized trace.
pub fn tracial_completion(
    e_fam: &[Vec<CMatrix>],
    f_fam: &[Vec<CMatrix>],
    words: &[Word],
) -> Result<Vec<(Word, C64)>> {
    let mut map: HashMap<Word, C64> = HashMap::new();
    for beta in words {
        for alpha in words {
            let w = beta.adjoint().concat(alpha);
            if w == Word::Zero || map.contains_key(&w) {
                continue;
            }
            let v = word_trace_value(e_fam, f_fam, &w)?;
            map.insert(w, v);
        }
    }
    let mut out: Vec<(Word, C64)> = map.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Assembles the moment matrix over the level-1 word list.
pub fn moment_matrix(corr: &NsCorrelation, completion: &[(Word, C64)]) -> Result<MomentMatrix> {
    let words = level1_words(corr.x_count, corr.y_count);
    moment_matrix_with_words(corr, completion, &words)
}

/// Assembles the moment matrix over an explicit word list: short-word
/// values come from the correlation (`s(e_{x,a}) = p(a|x)`,
/// `s(e_{x,a} f_{y,b}) = p(a,b|x,y)`), everything longer from the
/// completion. Completion entries conflicting with correlation-determined
/// values (or with each other after reduction) are rejected, and the
/// result is certified Hermitian PSD with a real `[0, 1]` diagonal.
pub fn moment_matrix_with_words(
    corr: &NsCorrelation,
    completion: &[(Word, C64)],
    words: &[Word],
) -> Result<MomentMatrix> {
    if corr.a_count != 2 || corr.b_count != 2 {
        return Err(Error::Dimension("moment matrices require binary outputs".into()));
    }
    let mut values: HashMap<Word, C64> = HashMap::new();
    values.insert(Word::identity(), cr(1.0));
    for x in 0..corr.x_count {
        for a in 0..2 {
            values.insert(Word::from_letters(&[Letter::E(x, a)]), cr(corr.marginal_a(x, a)));
        }
    }
    for y in 0..corr.y_count {
        for b in 0..2 {
            values.insert(Word::from_letters(&[Letter::F(y, b)]), cr(corr.marginal_b(y, b)));
        }
    }
    for x in 0..corr.x_count {
        for y in 0..corr.y_count {
            for a in 0..2 {
                for b in 0..2 {
                    values.insert(
                        Word::from_letters(&[Letter::E(x, a), Letter::F(y, b)]),
                        cr(corr.value(x, y, a, b)),
                    );
                }
            }
        }
    }
    for (w, v) in completion {
        if *w == Word::Zero {
            if v.norm() > 1e-12 {
                return Err(Error::InconsistentCompletion {
                    word: w.to_string(),
                    left: "0".into(),
                    right: format!("{v}"),
                });
            }
            continue;
        }
        if let Some(prev) = values.get(w) {
            if (prev - v).norm() > 1e-12 {
                return Err(Error::InconsistentCompletion {
                    word: w.to_string(),
                    left: format!("{prev}"),
                    right: format!("{v}"),
                });
            }
        } else {
            values.insert(w.clone(), *v);
        }
    }
    let k = words.len();
    let mut entries = CMatrix::zeros(k, k);
    for (j, beta) in words.iter().enumerate() {
        let beta_adj = beta.adjoint();
        for (i, alpha) in words.iter().enumerate() {
            let w = beta_adj.concat(alpha);
            let v = if w == Word::Zero {
                cr(0.0)
            } else {
                *values.get(&w).ok_or_else(|| Error::MissingWord { word: w.to_string() })?
            };
            entries.set(i, j, v);
        }
    }
    let cut = 100.0 * crate::DEFAULT_TOL * entries.norm().max(1.0);
    let herm = entries.dist(&entries.dagger());
    if herm > cut {
        return Err(Error::Violation {
            description: "moment matrix is not Hermitian".into(),
            magnitude: herm,
        });
    }
    for i in 0..k {
        let d = entries.at(i, i);
        if d.im.abs() > cut || d.re < -cut || d.re > 1.0 + cut {
            return Err(Error::Violation {
                description: format!("diagonal moment of {} outside [0, 1]", words[i]),
                magnitude: d.im.abs().max((d.re - 0.5).abs() - 0.5),
            });
        }
    }
    let sym = entries.add(&entries.dagger()).scale(cr(0.5));
    let min = herm_eig(&sym)?.min_eigenvalue();
    if min < -cut {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(MomentMatrix { words: words.to_vec(), entries })
}

/// Per-pair residuals of the anticommutation constraint set together with
/// the overall verdict.
#[derive(Clone, Debug)]
pub struct AcCheck {
    /// `((x, y), |m_{e_{x,0}, e_{y,0}} − m_{w_{x,y}, w_{y,x}} − 1/8|)` for
    /// each unordered input pair.
    pub residuals: Vec<((usize, usize), f64)>,
    pub verdict: Verdict,
}

/// Checks the anticommutation constraints
/// `m_{e_{x,0}, e_{y,0}} − m_{w_{x,y}, w_{y,x}} = 1/8` over all pairs of
/// the given input labels; every referenced word must be in the matrix.
pub fn check_ac(m: &MomentMatrix, labels: &[usize], tol: f64) -> Result<AcCheck> {
    let mut residuals = Vec::new();
    let mut worst = 0.0f64;
    for (i, &x) in labels.iter().enumerate() {
        for &y in &labels[i + 1..] {
            let e_x = Word::from_letters(&[Letter::E(x, 0)]);
            let e_y = Word::from_letters(&[Letter::E(y, 0)]);
            let w_xy = Word::from_letters(&[Letter::E(x, 0), Letter::E(y, 0)]);
            let w_yx = Word::from_letters(&[Letter::E(y, 0), Letter::E(x, 0)]);
            let m_ee = m.entry(&e_x, &e_y)?;
            let m_ww = m.entry(&w_xy, &w_yx)?;
            let res = (m_ee - m_ww - cr(0.125)).norm();
            worst = worst.max(res);
            residuals.push(((x, y), res));
        }
    }
    let verdict = if worst <= tol {
        Verdict::Valid
    } else {
        Verdict::Violation {
            description: "anticommutation moment constraint".into(),
            magnitude: worst,
        }
    };
    Ok(AcCheck { residuals, verdict })
}

//! Randomized property suites: algebraic identities under arbitrary inputs,
//! invariance of verdicts under the symmetries that must not matter (local
//! unitaries, global phases, ampliation), and dilation properties on
//! generated model families.

use proptest::prelude::*;

use qst::chsh::{chsh_score, extract_pvm, ideal_model, swap_selftest, OPTIMAL_BIAS};
use qst::dilation::ampliate;
use qst::games::{extract_pauli_form, pauli_hom_model, HomModel};
use qst::matcore::{
    c, cr, gram_factor, kron, partial_trace, random_gaussian, random_state, random_unitary,
    CMatrix, Side,
};
use qst::models::{
    conjugate_local, correlation_ns, random_binary_pvm, support_data, validate, Flavor,
    MeasurementFamily, Model,
};
use qst::schur::{rotated_psi, s3_irrep, schur_dilation, GroupRep};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tensor-split model: binary PVMs on each side, Haar-random state.
fn random_tensor_model(da: usize, db: usize, rng: &mut ChaCha8Rng) -> Model {
    let alice = random_binary_pvm(2, da, rng);
    let bob = random_binary_pvm(2, db, rng);
    let state = random_state(da * db, rng);
    Model::new(Flavor::TensorSplit { dim_a: da, dim_b: db }, alice, bob, state).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kron_mixed_product_identity(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        let mut rng = rng_from(seed);
        let a = random_gaussian(n, n, &mut rng);
        let b = random_gaussian(m, m, &mut rng);
        let cm = random_gaussian(n, n, &mut rng);
        let d = random_gaussian(m, m, &mut rng);
        let lhs = kron(&a, &b).mul(&kron(&cm, &d));
        let rhs = kron(&a.mul(&cm), &b.mul(&d));
        prop_assert!(lhs.dist(&rhs) <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn gram_factor_reconstructs_psd_inputs(seed in any::<u64>(), n in 1usize..6, r in 1usize..6) {
        let mut rng = rng_from(seed);
        let g = random_gaussian(r.min(n), n, &mut rng);
        let psd = g.dagger().mul(&g); // rank ≤ min(r, n), possibly deficient
        let f = gram_factor(&psd, 1e-12).unwrap();
        prop_assert!(f.dagger().mul(&f).dist(&psd) <= 1e-10 * psd.norm().max(1.0));
    }

    #[test]
    fn partial_trace_factors_and_preserves_trace(
        seed in any::<u64>(), da in 1usize..4, db in 1usize..4,
    ) {
        let mut rng = rng_from(seed);
        let a = random_gaussian(da, da, &mut rng);
        let b = random_gaussian(db, db, &mut rng);
        let t = kron(&a, &b);
        let scale = t.norm().max(1.0);
        let over_a = partial_trace(&t, (da, db), Side::A).unwrap();
        let over_b = partial_trace(&t, (da, db), Side::B).unwrap();
        prop_assert!(over_a.dist(&b.scale(a.trace())) <= 1e-12 * scale);
        prop_assert!(over_b.dist(&a.scale(b.trace())) <= 1e-12 * scale);
        prop_assert!((over_a.trace() - t.trace()).norm() <= 1e-12 * scale);
        prop_assert!((over_b.trace() - t.trace()).norm() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_tensor_models_give_quantum_correlations(
        seed in any::<u64>(), da in 1usize..4, db in 1usize..4,
    ) {
        let mut rng = rng_from(seed);
        let m = random_tensor_model(da, db, &mut rng);
        let p = correlation_ns(&m).unwrap();
        let t = p.table();
        // probabilities: nonnegative, each context sums to one
        for v in t {
            prop_assert!(*v >= -1e-9, "negative probability {v}");
        }
        let at = |x: usize, y: usize, a: usize, b: usize| t[((x * 2 + y) * 2 + a) * 2 + b];
        for x in 0..2 {
            for y in 0..2 {
                let s: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b)))
                    .map(|(a, b)| at(x, y, a, b)).sum();
                prop_assert!((s - 1.0).abs() <= 1e-9);
            }
        }
        // no-signalling: Alice's marginal is independent of y (and dually)
        for x in 0..2 {
            for a in 0..2 {
                let m0: f64 = (0..2).map(|b| at(x, 0, a, b)).sum();
                let m1: f64 = (0..2).map(|b| at(x, 1, a, b)).sum();
                prop_assert!((m0 - m1).abs() <= 1e-9);
            }
        }
        for y in 0..2 {
            for b in 0..2 {
                let m0: f64 = (0..2).map(|a| at(0, y, a, b)).sum();
                let m1: f64 = (0..2).map(|a| at(1, y, a, b)).sum();
                prop_assert!((m0 - m1).abs() <= 1e-9);
            }
        }
        // Tsirelson: no quantum model beats the optimal bias
        let (_, bias) = chsh_score(&p).unwrap();
        prop_assert!(bias <= OPTIMAL_BIAS + 1e-9, "bias {bias}");
    }

    #[test]
    fn ampliation_preserves_the_correlation(
        seed in any::<u64>(), aux_a in 1usize..4, aux_b in 1usize..4,
    ) {
        let mut rng = rng_from(seed);
        let base = random_tensor_model(2, 2, &mut rng);
        let xi = random_state(aux_a * aux_b, &mut rng);
        let big = ampliate(&base, aux_a, aux_b, &xi).unwrap();
        let p0 = correlation_ns(&base).unwrap();
        let p1 = correlation_ns(&big).unwrap();
        let worst = p0
            .table()
            .iter()
            .zip(p1.table())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        prop_assert!(worst <= 1e-10, "correlation drift {worst}");
    }

    #[test]
    fn support_reduction_is_idempotent(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let m = random_tensor_model(3, 2, &mut rng);
        let sd = support_data(&m, 8, 1e-9).unwrap();
        let again = support_data(&sd.reduced, 8, 1e-9).unwrap();
        prop_assert!(again.full_rank, "a reduced model is fully supported");
        let p0 = correlation_ns(&sd.reduced).unwrap();
        let p1 = correlation_ns(&again.reduced).unwrap();
        let worst = p0
            .table()
            .iter()
            .zip(p1.table())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        prop_assert!(worst <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn selftest_verdict_survives_symmetries(seed in any::<u64>(), phase in 0.0..std::f64::consts::TAU) {
        // local unitaries and a global state phase are invisible to the
        // swap self-test
        let mut rng = rng_from(seed);
        let ideal = ideal_model();
        let ua = random_unitary(2, &mut rng);
        let ub = random_unitary(2, &mut rng);
        let m = conjugate_local(&ideal, &ua, &ub).unwrap();
        let spun = Model::new(
            m.flavor,
            m.alice.clone(),
            m.bob.clone(),
            m.state.scale(c(phase.cos(), phase.sin())),
        )
        .unwrap();
        let rep = swap_selftest(&spun, 1e-8).unwrap();
        prop_assert!(rep.passed());
        prop_assert!(rep.residuals.iter().all(|r| *r <= 1e-8));
    }

    #[test]
    fn pvm_extraction_regularizes_optimal_models(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let ua = random_unitary(2, &mut rng);
        let ub = random_unitary(2, &mut rng);
        let m = conjugate_local(&ideal_model(), &ua, &ub).unwrap();
        let ext = extract_pvm(&m, 1e-9).unwrap();
        prop_assert!(validate(&ext.alice, 1e-9).unwrap().is_valid());
        prop_assert!(validate(&ext.bob, 1e-9).unwrap().is_valid());
        let p0 = correlation_ns(&m).unwrap();
        let p1 = correlation_ns(&ext).unwrap();
        let worst = p0
            .table()
            .iter()
            .zip(p1.table())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        prop_assert!(worst <= 1e-9, "extraction moved the correlation by {worst}");
    }

    #[test]
    fn coloring_extraction_recovers_the_multiplicity(seed in any::<u64>(), k in 1usize..4) {
        let m = scrambled_pauli(k, seed);
        let (_, n_dim, report) = extract_pauli_form(&m, 1e-9).unwrap();
        prop_assert_eq!(n_dim, k);
        prop_assert!(report.worst() <= 1e-7, "worst residual {}", report.worst());
    }
}

/// Conjugated ampliation of the Pauli coloring model with multiplicity `k`.
fn scrambled_pauli(k: usize, seed: u64) -> HomModel {
    let base = pauli_hom_model();
    let mut rng = rng_from(seed);
    let d = 2 * k;
    let q = random_unitary(d, &mut rng);
    let units: Vec<Vec<Vec<CMatrix>>> = base
        .units
        .iter()
        .map(|per_x| {
            per_x
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|e| q.mul(&kron(e, &CMatrix::identity(k))).mul(&q.dagger()))
                        .collect()
                })
                .collect()
        })
        .collect();
    let state = CMatrix::identity(d).scale(cr(1.0 / d as f64));
    HomModel::new(units, state).unwrap()
}

/// Diagonal USOM model generated by the S₃ irrep at multiplicity
/// `weights.len()`, conjugated by seeded local unitaries.
fn extended_s3_model(rep: &GroupRep, psi0: &CMatrix, weights: &[f64], seeds: (u64, u64)) -> Model {
    let mult = weights.len();
    let d = rep.dim() * mult;
    let qa = random_unitary(d, &mut rng_from(seeds.0));
    let qb = random_unitary(d, &mut rng_from(seeds.1));
    let g = rep.group.clone();
    let n = g.order();
    let zero = CMatrix::zeros(d, d);
    let build = |q: &CMatrix| -> Vec<Vec<Vec<Vec<CMatrix>>>> {
        (0..n)
            .map(|s| {
                (0..n)
                    .map(|sp| {
                        let core = kron(rep.matrix(g.mul(g.inv(s), sp)), &CMatrix::identity(mult));
                        let w = q.mul(&core).mul(&q.dagger());
                        (0..n)
                            .map(|gg| {
                                (0..n)
                                    .map(|gp| if (gg, gp) == (s, sp) { w.clone() } else { zero.clone() })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };
    let mut ext = vec![cr(0.0); d * d];
    for i in 0..rep.dim() {
        for j in 0..rep.dim() {
            for (mu, wgt) in weights.iter().enumerate() {
                ext[(i * mult + mu) * d + (j * mult + mu)] = psi0.at(i * rep.dim() + j, 0) * cr(*wgt);
            }
        }
    }
    let state = kron(&qa, &qb).mul(&CMatrix::col_vec(&ext));
    Model::new(
        Flavor::TensorSplit { dim_a: d, dim_b: d },
        MeasurementFamily::usom(build(&qa)).unwrap(),
        MeasurementFamily::usom(build(&qb)).unwrap(),
        state,
    )
    .unwrap()
}

#[test]
fn schur_dilation_accepts_extended_models() {
    let rep = s3_irrep();
    let psi = rotated_psi(std::f64::consts::PI / 3.0, cr(0.5), cr(3f64.sqrt() / 2.0)).unwrap();
    let mut rng = rng_from(99);
    for trial in 0..10u64 {
        use rand::Rng;
        let w: f64 = rng.gen_range(0.15..0.85);
        let weights = [w.sqrt(), (1.0 - w).sqrt()];
        let m = extended_s3_model(&rep, &psi, &weights, (40 + trial, 60 + trial));
        let report = schur_dilation(&m, &rep, &rep, &psi, 1e-9).unwrap();
        assert!(report.passed(), "trial {trial}");
        assert!(
            report.worst_residual() <= 1e-8,
            "trial {trial}: worst {:.3e}",
            report.worst_residual()
        );
    }
    // one multiplicity-3 extension
    let weights = [0.2f64.sqrt(), 0.3f64.sqrt(), 0.5f64.sqrt()];
    let m = extended_s3_model(&rep, &psi, &weights, (7, 8));
    let report = schur_dilation(&m, &rep, &rep, &psi, 1e-9).unwrap();
    assert!(report.passed());
    assert!(report.worst_residual() <= 1e-8);
}

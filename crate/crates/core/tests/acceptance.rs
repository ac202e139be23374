//! End-to-end acceptance gate: one test per shipped claim, each asserting
//! the stated tolerance and staying inside the stated runtime budget.
//! Claims about command verbs exercise the compiled binary; claims about
//! numerical behavior exercise the library directly.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use qst::chsh::{chsh_score, ideal_model, swap_selftest, OPTIMAL_BIAS};
use qst::clifford::{
    ac_words, check_ac, clifford_correlation, clifford_rep, moment_matrix_with_words,
    tracial_completion, witness_kernel, CorrelationMode,
};
use qst::dilation::{ampliate, usom_dilate};
use qst::games::{gamma_correlation, pauli_hom_model, verify_perfect, HomModel};
use qst::matcore::{
    cr, gram_factor, kron, partial_trace, random_gaussian, random_state, random_unitary, CMatrix,
    Side,
};
use qst::models::{
    conjugate_local, correlation_ns, random_commuting_model, random_som_family, split_commuting,
    support_data, Flavor, MeasurementFamily, Model,
};
use qst::schur::{
    rotated_psi, s3_irrep, schur_channel, schur_dilation, selftest_hypotheses, GroupRep,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Runs the binary and returns its exit code and parsed report.
fn qst_run(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_qst"))
        .args(args)
        .output()
        .expect("binary runs");
    let code = out.status.code().expect("no signal");
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, report)
}

fn items(report: &Value) -> &Vec<Value> {
    report["items"].as_array().expect("report has items")
}

fn item<'a>(report: &'a Value, name: &str) -> &'a Value {
    items(report)
        .iter()
        .find(|i| i["name"].as_str().is_some_and(|n| n == name || n.starts_with(name)))
        .unwrap_or_else(|| panic!("report has item {name}"))
}

fn residual(report: &Value, name: &str) -> f64 {
    item(report, name)["residual"].as_f64().unwrap_or_else(|| panic!("{name} has a residual"))
}

fn write_temp(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("qst-acceptance-{name}-{}", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

fn mat_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| {
                Value::Array(
                    (0..m.cols()).map(|j| json!([m.at(i, j).re, m.at(i, j).im])).collect(),
                )
            })
            .collect(),
    )
}

fn budget(start: Instant, seconds: f64, what: &str) {
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < seconds, "{what} took {elapsed:.2}s, budget {seconds}s");
}

#[test]
fn criterion_1_chsh_value() {
    let start = Instant::now();
    let (code, report) = qst_run(&["chsh", "score", &fixture("ideal_chsh.json")]);
    assert_eq!(code, 0);
    let win = item(&report, "winProb")["value"].as_f64().unwrap();
    let bias = item(&report, "bias")["value"].as_f64().unwrap();
    assert!((win - (0.5 + 0.5 / 2f64.sqrt())).abs() <= 1e-12, "winProb {win}");
    assert!((bias - 8f64.sqrt()).abs() <= 1e-12, "bias {bias}");
    budget(start, 0.1, "chsh score");
}

#[test]
fn criterion_2_chsh_selftest() {
    let start = Instant::now();
    // (a) the ideal model, through the verb.
    let (code, report) = qst_run(&["chsh", "selftest", &fixture("ideal_chsh.json")]);
    assert_eq!(code, 0);
    let per_pair: Vec<f64> = items(&report)
        .iter()
        .filter(|i| i["name"].as_str().unwrap().starts_with("generatorResidual"))
        .map(|i| i["residual"].as_f64().unwrap())
        .collect();
    assert_eq!(per_pair.len(), 16);
    assert!(per_pair.iter().all(|r| *r <= 1e-8));

    let ideal = ideal_model();
    // (b) local-unitary conjugates.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ua = random_unitary(2, &mut rng);
        let ub = random_unitary(2, &mut rng);
        let m = conjugate_local(&ideal, &ua, &ub).unwrap();
        let rep = swap_selftest(&m, 1e-8).unwrap();
        assert!(rep.passed(), "seed {seed}");
        assert_eq!(rep.residuals.len(), 16);
        assert!(rep.residuals.iter().all(|r| *r <= 1e-8), "seed {seed}");
    }
    // (c) ampliations with entangled auxiliary states.
    for (aux_a, aux_b) in [(2usize, 2usize), (2, 3), (3, 3)] {
        let k = aux_a.min(aux_b);
        let mut xi = CMatrix::zeros(aux_a * aux_b, 1);
        for i in 0..k {
            xi.set(i * aux_b + i, 0, cr(1.0 / (k as f64).sqrt()));
        }
        let m = ampliate(&ideal, aux_a, aux_b, &xi).unwrap();
        let rep = swap_selftest(&m, 1e-8).unwrap();
        assert!(rep.passed(), "aux ({aux_a},{aux_b})");
        assert!(rep.residuals.iter().all(|r| *r <= 1e-8), "aux ({aux_a},{aux_b})");
    }
    budget(start, 2.0, "chsh selftest family");
}

#[test]
fn criterion_3_chsh_counterexample() {
    let start = Instant::now();
    let (code, report) = qst_run(&["chsh", "counterexample"]);
    assert_eq!(code, 0);
    assert_eq!(item(&report, "aliceSom")["verdict"], "pass");
    assert_eq!(item(&report, "bobSom")["verdict"], "pass");
    assert!(residual(&report, "qnsDiagonalAgreement") <= 1e-10);
    let norm = item(&report, "obstructionNorm")["value"].as_f64().unwrap();
    assert!(norm > 0.1, "obstruction norm {norm}");
    budget(start, 1.0, "chsh counterexample");
}

#[test]
fn criterion_4_clifford_witness() {
    let start = Instant::now();
    let wk2 = witness_kernel(2).unwrap();
    assert!(wk2.min_eigenvalue >= -1e-12);
    assert_eq!(wk2.kernel_dim, 1);
    let omega = CMatrix::from_fn(4, 1, |i, _| {
        cr(if i == 0 || i == 3 { 1.0 / 2f64.sqrt() } else { 0.0 })
    });
    let overlap = wk2.basis.column(0).inner(&omega).norm_sqr();
    assert!((1.0 - overlap).abs() <= 1e-10, "kernel is spanned by the maximally entangled state");
    let wk4 = witness_kernel(4).unwrap();
    assert_eq!(wk4.kernel_dim, 1);
    for n in ["2", "4"] {
        let (code, _) = qst_run(&["clifford", "witness", "--n", n]);
        assert_eq!(code, 0, "witness --n {n}");
    }
    budget(start, 1.0, "clifford witness");
}

#[test]
fn criterion_5_ac_membership() {
    let start = Instant::now();
    for n in [2usize, 4] {
        let rep = clifford_rep(n).unwrap();
        let r = rep.projections();
        let corr = clifford_correlation(n, &CorrelationMode::Canonical).unwrap();
        let labels: Vec<usize> = (0..n).collect();
        let words = ac_words(&labels);
        let completion = tracial_completion(&r, &r, &words).unwrap();
        let mm = moment_matrix_with_words(&corr, &completion, &words).unwrap();
        let ac = check_ac(&mm, &labels, 1e-12).unwrap();
        assert!(ac.verdict.is_valid(), "n={n}");
        assert!(ac.residuals.iter().all(|(_, r)| *r <= 1e-12), "n={n}");
    }
    let (code, report) = qst_run(&["clifford", "ac-check", "--n", "2", "--independent"]);
    assert_eq!(code, 1, "the classical pair must fail membership");
    let r = residual(&report, "acResidual(0,1)");
    assert!((r - 0.125).abs() <= 1e-12, "violation is exactly 1/8, got {r}");
    budget(start, 1.0, "ac membership");
}

/// Conjugated ampliation of the Pauli coloring model with multiplicity `k`.
fn scrambled_pauli(k: usize, seed: u64) -> HomModel {
    let base = pauli_hom_model();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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

#[test]
fn criterion_6_graph_coloring() {
    let start = Instant::now();
    let g = gamma_correlation(&pauli_hom_model()).unwrap();
    let pc = verify_perfect(&g, 2, 1e-12).unwrap();
    assert!(pc.verdict.is_valid());
    assert!(pc.diagonal_residuals.iter().all(|r| *r <= 1e-12));
    assert!(pc.offdiagonal_residuals.iter().all(|(_, r)| *r <= 1e-12));

    for seed in 0..20u64 {
        let k = 1 + (seed as usize) % 3;
        let m = scrambled_pauli(k, 1000 + seed);
        let (_, n_dim, report) = qst::games::extract_pauli_form(&m, 1e-9).unwrap();
        assert_eq!(n_dim, k, "seed {seed}");
        assert!(report.worst() <= 1e-7, "seed {seed}: worst {:.3e}", report.worst());
    }

    // The verb, on one scrambled instance.
    let m = scrambled_pauli(2, 42);
    let units_json = Value::Array(
        m.units
            .iter()
            .map(|per_x| {
                Value::Array(
                    per_x
                        .iter()
                        .map(|row| Value::Array(row.iter().map(mat_json).collect()))
                        .collect(),
                )
            })
            .collect(),
    );
    let doc = json!({ "units": units_json, "traceState": mat_json(&m.trace_state) });
    let path = write_temp("qcolor", &serde_json::to_string(&doc).unwrap());
    let (code, report) = qst_run(&["qcolor", "extract", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(code, 0);
    assert!(residual(&report, "unitResidual") <= 1e-7);
    budget(start, 5.0, "graph coloring");
}

#[test]
fn criterion_7_usom_dilation() {
    let start = Instant::now();
    for seed in 0..50u64 {
        let n = 1 + (seed as usize) % 3;
        let h = 1 + (seed as usize / 3) % 3;
        let gk = h + (seed as usize / 9) % 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = random_som_family(n, n, h, gk, &mut rng);
        let (w, u) = usom_dilate(&fam).unwrap();
        let l = w.rows();
        let id = CMatrix::identity(u.rows());
        let unit = u.dagger().mul(&u).dist(&id).max(u.mul(&u.dagger()).dist(&id));
        assert!(unit <= 1e-9, "seed {seed}: unitarity {unit:.3e}");
        let mut rec = 0.0f64;
        for x in 0..n {
            for xp in 0..n {
                for a in 0..n {
                    for ap in 0..n {
                        let ua = u.block(a * l, x * l, l, l);
                        let ub = u.block(ap * l, xp * l, l, l);
                        let got = w.dagger().mul(&ua.dagger()).mul(&ub).mul(&w);
                        rec = rec.max(got.dist(fam.som_block(x, xp, a, ap)));
                    }
                }
            }
        }
        assert!(rec <= 1e-9, "seed {seed}: reconstruction {rec:.3e}");
    }
    let (code, report) = qst_run(&["som", "dilate", &fixture("random_som.json")]);
    assert_eq!(code, 0);
    assert!(residual(&report, "alice.unitarityResidual") <= 1e-9);
    assert!(residual(&report, "alice.reconstructionResidual") <= 1e-9);
    assert!(residual(&report, "bob.reconstructionResidual") <= 1e-9);
    budget(start, 5.0, "usom dilation");
}

/// Diagonal USOM model generated by the S₃ irrep with each unitary block
/// extended to multiplicity `weights.len()` and conjugated by seeded local
/// unitaries; the state carries the weights on the multiplicity index.
fn extended_s3_model(rep: &GroupRep, psi0: &CMatrix, weights: &[f64], seeds: (u64, u64)) -> Model {
    let mult = weights.len();
    let d = rep.dim() * mult;
    let qa = random_unitary(d, &mut ChaCha8Rng::seed_from_u64(seeds.0));
    let qb = random_unitary(d, &mut ChaCha8Rng::seed_from_u64(seeds.1));
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
fn criterion_8_schur_s3() {
    let start = Instant::now();
    let pi = std::f64::consts::PI;
    let rep = s3_irrep();
    let psi = rotated_psi(pi / 3.0, cr(0.5), cr(3f64.sqrt() / 2.0)).unwrap();

    // Unital CPTP at 1e-10 and the hypothesis pattern at θ = π/3.
    let data = schur_channel(&rep, &rep, &psi).unwrap();
    assert!(data.validate(1e-10).unwrap().is_valid());
    let h = selftest_hypotheses(&rep, &rep, &psi, 1e-9).unwrap();
    assert!(h.marginally_cyclic);
    assert_eq!(h.extremality_rank, 16);
    assert!(h.verdict);

    // The rank drops at θ = π/2.
    let psi_half = rotated_psi(pi / 2.0, cr(0.5), cr(3f64.sqrt() / 2.0)).unwrap();
    let h_half = selftest_hypotheses(&rep, &rep, &psi_half, 1e-9).unwrap();
    assert!(h_half.extremality_rank < 16, "rank {}", h_half.extremality_rank);

    // Verbs: build at 1e-10, hypotheses at both angles, self-test on a
    // conjugated multiplicity-2 extension.
    let ideal3 = write_temp(
        "ideal3",
        &serde_json::to_string(&json!({
            "theta": pi / 3.0, "alpha": [0.5, 0.0], "beta": [3f64.sqrt() / 2.0, 0.0]
        }))
        .unwrap(),
    );
    let ideal2 = write_temp(
        "ideal2",
        &serde_json::to_string(&json!({
            "theta": pi / 2.0, "alpha": [0.5, 0.0], "beta": [3f64.sqrt() / 2.0, 0.0]
        }))
        .unwrap(),
    );
    let (code, _) = qst_run(&["schur", "build", "--tol", "1e-10", ideal3.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, report) = qst_run(&["schur", "hypotheses", ideal3.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(item(&report, "extremalityRank")["value"].as_u64(), Some(16));
    let (code, report) = qst_run(&["schur", "hypotheses", ideal2.to_str().unwrap()]);
    assert_eq!(code, 1, "π/2 family fails the rank gate");
    assert!(item(&report, "extremalityRank")["value"].as_u64().unwrap() < 16);

    let m = extended_s3_model(&rep, &psi, &[0.3f64.sqrt(), 0.7f64.sqrt()], (21, 22));
    let rep_lib = schur_dilation(&m, &rep, &rep, &psi, 1e-9).unwrap();
    assert!(rep_lib.passed());
    assert!(rep_lib.worst_residual() <= 1e-8);
    let model_doc = serde_json::to_string(&qst::cli::model_to_json(&m)).unwrap();
    let model_path = write_temp("schur-ext", &model_doc);
    let (code, report) = qst_run(&[
        "schur",
        "selftest",
        model_path.to_str().unwrap(),
        ideal3.to_str().unwrap(),
    ]);
    for p in [&ideal3, &ideal2, &model_path] {
        std::fs::remove_file(p).unwrap();
    }
    assert_eq!(code, 0);
    assert!(residual(&report, "worstGeneratorResidual") <= 1e-8);
    budget(start, 3.0, "schur s3");
}

#[test]
fn criterion_9_property_suites() {
    let start = Instant::now();
    // Reduced-model correlation preservation on random commuting models.
    let shapes: [&[(usize, usize)]; 4] = [&[(2, 1), (1, 2)], &[(2, 2)], &[(1, 1), (2, 1)], &[(1, 3)]];
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let m = random_commuting_model(shapes[(seed as usize) % shapes.len()], &mut rng);
        let sd = support_data(&m, 8, 1e-9).unwrap();
        let f = correlation_ns(&m).unwrap();
        let fr = correlation_ns(&sd.reduced).unwrap();
        let diff = f
            .table()
            .iter()
            .zip(fr.table())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff <= 1e-9, "seed {seed}: correlation shift {diff:.3e}");

        // Splitting: weights resum to one and reassemble the correlation.
        let parts = split_commuting(&m, 1e-9).unwrap();
        let wsum: f64 = parts.iter().map(|(w, _)| *w).sum();
        assert!((wsum - 1.0).abs() <= 1e-9, "seed {seed}");
        let mut acc = vec![0.0f64; f.table().len()];
        for (w, part) in &parts {
            let p = correlation_ns(part).unwrap();
            for (s, v) in acc.iter_mut().zip(p.table()) {
                *s += w * v;
            }
        }
        let re = f
            .table()
            .iter()
            .zip(&acc)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(re <= 1e-9, "seed {seed}: reassembly {re:.3e}");
    }

    // Algebraic identities on random inputs.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let n = 2 + (seed as usize) % 3;
        let a = random_gaussian(n, n, &mut rng);
        let b = random_gaussian(n, n, &mut rng);
        let c = random_gaussian(n, n, &mut rng);
        let d = random_gaussian(n, n, &mut rng);
        let lhs = kron(&a, &b).mul(&kron(&c, &d));
        let rhs = kron(&a.mul(&c), &b.mul(&d));
        let scale = lhs.norm().max(1.0);
        assert!(lhs.dist(&rhs) <= 1e-12 * scale, "seed {seed}: kron mixed product");

        let psd = a.dagger().mul(&a);
        let g = gram_factor(&psd, 1e-12).unwrap();
        assert!(
            g.dagger().mul(&g).dist(&psd) <= 1e-12 * psd.norm().max(1.0),
            "seed {seed}: gram factor"
        );

        let t = kron(&a, &b);
        let ta = partial_trace(&t, (n, n), Side::A).unwrap();
        let tb = partial_trace(&t, (n, n), Side::B).unwrap();
        assert!(ta.dist(&b.scale(a.trace())) <= 1e-12 * t.norm().max(1.0), "seed {seed}");
        assert!(tb.dist(&a.scale(b.trace())) <= 1e-12 * t.norm().max(1.0), "seed {seed}");

        let psi = random_state(n * n, &mut rng);
        let rho = psi.mul(&psi.dagger());
        let tr_a = partial_trace(&rho, (n, n), Side::A).unwrap();
        let tr_b = partial_trace(&rho, (n, n), Side::B).unwrap();
        assert!((tr_a.trace().re - 1.0).abs() <= 1e-12, "seed {seed}");
        assert!((tr_b.trace().re - 1.0).abs() <= 1e-12, "seed {seed}");
    }

    // The ideal score itself, as a direct identity.
    let (win, bias) = chsh_score(&correlation_ns(&ideal_model()).unwrap()).unwrap();
    assert!((win - (0.5 + 0.5 / 2f64.sqrt())).abs() <= 1e-12);
    assert!((bias - OPTIMAL_BIAS).abs() <= 1e-12);
    budget(start, 5.0, "property suites");
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criterion 9 (CIFAR-10 ordering with the reference CNN) takes hours in release
//! mode and needs the dataset on disk, so it is reported as skipped here; the
//! README gives the reproduction recipe.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use dpsda_core::data::{make_toy_dataset, partition, LabeledDataset, PartitionKind, PartitionSpec};
use dpsda_core::dp::{
    dp_nn_histogram, gaussian_sigma, pe_generate, GeneratorConfig, GeneratorKind, PrivacyBudget,
};
use dpsda_core::fl::{
    aggregate, load_data, run_experiment, Algorithm, ExperimentConfig, ExperimentData, RunOutput,
};
use dpsda_core::metrics::{summarize, ConfusionMatrix, RoundLog};
use dpsda_core::nn::{init_params, loss_and_gradient, Architecture, Layer, LossConfig};
use dpsda_core::{ErrorFamily, ModelParams, Tensor};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- 1

/// Straight-line f64 forward pass of the toy MLP, independent of the library.
fn mlp_loss_f64(p: &[Vec<f64>], dims: (usize, usize, usize), x: &[f64], label: usize) -> f64 {
    let (inputs, hidden, classes) = dims;
    let h: Vec<f64> = (0..hidden)
        .map(|j| {
            let s: f64 = (0..inputs)
                .map(|i| p[0][j * inputs + i] * x[i])
                .sum::<f64>()
                + p[1][j];
            s.max(0.0)
        })
        .collect();
    let z: Vec<f64> = (0..classes)
        .map(|k| {
            (0..hidden)
                .map(|j| p[2][k * hidden + j] * h[j])
                .sum::<f64>()
                + p[3][k]
        })
        .collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[label]
}

fn criterion_1() -> Outcome {
    let dims = (6, 10, 4);
    let arch = Architecture::ToyMlp {
        inputs: dims.0,
        hidden: dims.1,
        classes: dims.2,
    };
    let h = 1e-3;
    let mut worst = 0.0f64;
    let mut count = 0;
    for case in 0..10u64 {
        let model = init_params(arch, 100 + case).unwrap();
        ensure(model.num_params() <= 500, "model too large")?;
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let x: Vec<f32> = (0..dims.0).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = rng.random_range(0..dims.2);
        let batch = Tensor::new(vec![1, dims.0], x.clone()).unwrap();
        let (_, grads) = loss_and_gradient(&model, &batch, &[label], &LossConfig::nll()).unwrap();
        let base: Vec<Vec<f64>> = (0..4)
            .map(|l| model.layer(l).iter().map(|&v| v as f64).collect())
            .collect();
        let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        for l in 0..4 {
            for i in 0..base[l].len() {
                let mut plus = base.clone();
                plus[l][i] += h;
                let mut minus = base.clone();
                minus[l][i] -= h;
                let fd = (mlp_loss_f64(&plus, dims, &x64, label)
                    - mlp_loss_f64(&minus, dims, &x64, label))
                    / (2.0 * h);
                let an = grads.layer(l)[i] as f64;
                let scale = fd.abs().max(an.abs());
                let err = if scale < 1e-7 {
                    0.0
                } else {
                    (fd - an).abs() / scale
                };
                worst = worst.max(err);
                count += 1;
            }
        }
    }
    ensure(worst <= 1e-3, format!("max relative error {worst:.2e}"))?;
    Ok(format!(
        "{count} parameters checked, max relative error {worst:.2e}"
    ))
}

// ---------------------------------------------------------------- 2

fn with_values(arch: Architecture, values: &[Vec<f32>]) -> ModelParams {
    let template = ModelParams::zeros(arch).unwrap();
    let layers = template
        .layers()
        .iter()
        .zip(values)
        .map(|(l, v)| Layer {
            name: l.name.clone(),
            tensor: Tensor::new(l.tensor.shape().to_vec(), v.clone()).unwrap(),
        })
        .collect();
    ModelParams::new(arch, layers).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let arch = Architecture::ToyMlp {
        inputs: 8,
        hidden: 16,
        classes: 5,
    };
    for seed in 0..5 {
        let w = init_params(arch, seed).unwrap();
        for k in 1..=10 {
            ensure(
                aggregate(&vec![w.clone(); k]).unwrap() == w,
                format!("aggregate of {k} copies differs (seed {seed})"),
            )?;
        }
    }
    let models: Vec<ModelParams> = (0..5).map(|s| init_params(arch, 40 + s).unwrap()).collect();
    let reference = aggregate(&models).unwrap();
    let perms = permutations(models.len());
    for p in &perms {
        let shuffled: Vec<ModelParams> = p.iter().map(|&i| models[i].clone()).collect();
        ensure(
            aggregate(&shuffled).unwrap().flatten() == reference.flatten(),
            format!("permutation {p:?} changed the result"),
        )?;
    }
    let tiny = Architecture::ToyMlp {
        inputs: 1,
        hidden: 1,
        classes: 2,
    };
    let a = with_values(
        tiny,
        &[vec![0.0], vec![0.0], vec![0.0, 0.0], vec![1.0, 2.0]],
    );
    let b = with_values(
        tiny,
        &[vec![0.0], vec![0.0], vec![0.0, 0.0], vec![3.0, 4.0]],
    );
    ensure(
        aggregate(&[a, b]).unwrap().layer(3) == [2.0, 3.0],
        "[1,2] and [3,4] did not average to [2,3]",
    )?;
    Ok(format!(
        "10 copy counts x 5 models, {} permutations, two-client case",
        perms.len()
    ))
}

// ---------------------------------------------------------------- 3, 8, 10

fn short_toy(algorithm: Algorithm) -> ExperimentConfig {
    let mut c = ExperimentConfig::toy().for_algorithm(algorithm);
    c.rounds = 5;
    c
}

fn run_all(config: &ExperimentConfig, data: &ExperimentData) -> Vec<RunOutput> {
    config
        .seeds
        .iter()
        .map(|&s| run_experiment(config, s, data, None).unwrap())
        .collect()
}

fn criterion_3(data: &ExperimentData, emitted: &mut Vec<RoundLog>) -> Outcome {
    let fedavg = run_all(&short_toy(Algorithm::FedAvg), data);
    let mut prox = short_toy(Algorithm::FedProx);
    prox.fedprox_mu = 0.0;
    let fedprox = run_all(&prox, data);
    for (a, b) in fedavg.iter().zip(&fedprox) {
        ensure(
            a.logs == b.logs,
            format!("seed {}: round logs differ", a.seed),
        )?;
        ensure(
            a.final_model == b.final_model,
            format!("seed {}: weights differ", a.seed),
        )?;
    }
    emitted.extend(
        fedavg
            .iter()
            .chain(&fedprox)
            .flat_map(|r| r.logs.iter().cloned()),
    );
    Ok(format!("{} seeds x 5 rounds bit-identical", fedavg.len()))
}

fn criterion_8(data: &ExperimentData, emitted: &mut Vec<RoundLog>) -> Outcome {
    let fedavg = run_all(&short_toy(Algorithm::FedAvg), data);
    let mut empty = short_toy(Algorithm::DpsdaFl);
    empty.share.max_class_fraction = 0.0;
    let dpsda = run_all(&empty, data);
    for (a, b) in fedavg.iter().zip(&dpsda) {
        ensure(b.pooled_classes.is_empty(), "pool was not empty")?;
        ensure(
            a.logs == b.logs,
            format!("seed {}: round logs differ", a.seed),
        )?;
    }
    emitted.extend(dpsda.iter().flat_map(|r| r.logs.iter().cloned()));
    Ok(format!(
        "{} seeds, empty pool reproduces FedAvg",
        dpsda.len()
    ))
}

fn log_with(correct: u64, total: u64) -> RoundLog {
    let mut m = ConfusionMatrix::new(2);
    for i in 0..total {
        m.record(
            i as usize % 2,
            if i < correct {
                i as usize % 2
            } else {
                1 - i as usize % 2
            },
        )
        .unwrap();
    }
    RoundLog::from_confusion(1, m).unwrap()
}

fn criterion_10(emitted: &[RoundLog]) -> Outcome {
    ensure(!emitted.is_empty(), "no round logs were collected")?;
    for log in emitted {
        log.check_identities()
            .map_err(|e| format!("round {}: {e}", log.round))?;
        let m = &log.confusion;
        let acc = m.trace() as f64 / m.total() as f64;
        ensure(log.top1_accuracy == acc, "trace/total identity broken")?;
        for c in 0..m.classes() {
            let r = match m.row_sum(c) {
                0 => 0.0,
                n => m.get(c, c) as f64 / n as f64,
            };
            ensure(
                log.per_class_recall[c] == r,
                "recall/rowsum identity broken",
            )?;
        }
    }
    let s = summarize(&[log_with(28, 100), log_with(32, 100)]).unwrap();
    ensure((s.mean - 0.30).abs() < 1e-12, format!("mean {}", s.mean))?;
    ensure((s.std - 0.0283).abs() < 1e-4, format!("std {}", s.std))?;
    Ok(format!(
        "{} emitted logs consistent; summarize -> {:.2} +/- {:.4}",
        emitted.len(),
        s.mean,
        s.std
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let k = rng.random_range(2..=12);
        let per_class = rng.random_range(5..=40);
        let n_clients = rng.random_range(1..=8);
        let d = make_toy_dataset(k, per_class, 2, 1.0, case).unwrap();
        let kind = match rng.random_range(0..3) {
            0 => PartitionKind::Iid,
            1 => PartitionKind::LabelSkew {
                classes_per_client: rng.random_range(1..=k.min(per_class)),
            },
            _ => {
                let raw: Vec<f64> = (0..n_clients).map(|_| rng.random_range(0.1..3.0)).collect();
                let total: f64 = raw.iter().sum();
                PartitionKind::QuantitySkew {
                    quantity_weights: raw.iter().map(|w| w / total).collect(),
                }
            }
        };
        let spec = PartitionSpec {
            kind: kind.clone(),
            n_clients,
            seed: case,
        };
        let parts = match partition(&d, &spec) {
            Ok(p) => p,
            Err(e) => {
                // Label skew may legitimately need more examples per class than exist.
                ensure(
                    matches!(kind, PartitionKind::LabelSkew { .. }),
                    format!("case {case}: {e}"),
                )?;
                continue;
            }
        };
        ensure(
            parts.len() == n_clients,
            format!("case {case}: wrong client count"),
        )?;
        let mut ids: Vec<u64> = parts
            .iter()
            .flat_map(|p| p.examples().iter().map(|e| e.id))
            .collect();
        ids.sort_unstable();
        // Label skew with fewer client slots than classes leaves classes unassigned.
        let held: BTreeSet<usize> = parts.iter().flat_map(|p| p.held_classes()).collect();
        let source: Vec<u64> = d
            .examples()
            .iter()
            .filter(|e| held.contains(&e.label))
            .map(|e| e.id)
            .collect();
        ensure(
            ids == source,
            format!("case {case}: conservation violated ({kind:?})"),
        )?;
        if !matches!(kind, PartitionKind::LabelSkew { .. }) {
            ensure(
                held.len() == k,
                format!("case {case}: {kind:?} dropped classes"),
            )?;
        }
        if let PartitionKind::LabelSkew { classes_per_client } = kind {
            for p in &parts {
                ensure(
                    p.held_classes().len() == classes_per_client,
                    format!("case {case}: client holds {:?}", p.held_classes()),
                )?;
            }
        }
    }
    let d = make_toy_dataset(10, 50, 4, 1.0, 0).unwrap();
    let parts = partition(
        &d,
        &PartitionSpec {
            kind: PartitionKind::LabelSkew {
                classes_per_client: 2,
            },
            n_clients: 5,
            seed: 0,
        },
    )
    .unwrap();
    let mut owners = vec![Vec::new(); 10];
    for (i, p) in parts.iter().enumerate() {
        for c in p.held_classes() {
            owners[c].push(i);
        }
    }
    ensure(
        owners.iter().all(|o| o.len() == 1),
        format!("5x2 spec is not a perfect cover: {owners:?}"),
    )?;
    Ok("100 random specs conserve examples; 5x2 spec is a perfect cover".into())
}

// ---------------------------------------------------------------- 5

fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Smallest sigma whose Gaussian privacy profile stays below delta.
fn sigma_oracle(eps: f64, delta: f64, sens: f64) -> f64 {
    let profile = |s: f64| {
        phi(sens / (2.0 * s) - eps * s / sens) - eps.exp() * phi(-sens / (2.0 * s) - eps * s / sens)
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    while profile(hi) > delta {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn criterion_5() -> Outcome {
    let private = make_toy_dataset(2, 50, 3, 2.0, 5).unwrap();
    let class0 = LabeledDataset::new(private.of_class(0).cloned().collect(), 2).unwrap();
    let candidate = [Tensor::zeros(vec![3])];
    let draws = 10_000u64;
    let mut budget = PrivacyBudget::new(10.0, 1e-5, draws).unwrap();
    let sigma = budget.sigma();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let noise: Vec<f64> = (0..draws)
        .map(|_| dp_nn_histogram(&class0, &candidate, &mut budget, &mut rng).unwrap()[0] - 50.0)
        .collect();
    let mean = noise.iter().sum::<f64>() / draws as f64;
    let sd = (noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
    ensure(
        (sd / sigma - 1.0).abs() <= 0.03,
        format!("empirical std {sd:.4} vs sigma {sigma:.4}"),
    )?;
    ensure(
        dp_nn_histogram(&class0, &candidate, &mut budget, &mut rng).is_err()
            && budget.queries_used() == draws,
        "exhausted budget still released",
    )?;

    let config = GeneratorConfig {
        kind: GeneratorKind::PrivateEvolutionLite,
        iterations: 4,
        population: 30,
        survivors: 10,
        variation_scale: 0.3,
        feature_range: (-4.0, 6.0),
        ..GeneratorConfig::default()
    };
    let mut budget = config.client_budget(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let out = pe_generate(&private, 0, 25, &config, &mut budget, &mut rng).unwrap();
    ensure(out.len() == 25, "wrong synthetic count")?;
    ensure(
        budget.queries_used() == config.iterations as u64,
        format!(
            "{} queries for T_pe = {}",
            budget.queries_used(),
            config.iterations
        ),
    )?;

    let mut short = PrivacyBudget::new(1.0, 1e-5, 3).unwrap();
    let err = pe_generate(&private, 0, 5, &config, &mut short, &mut rng).unwrap_err();
    ensure(
        err.family() == ErrorFamily::Privacy,
        format!("unexpected error {err}"),
    )?;
    ensure(
        short.queries_used() == 0,
        "budget was spent before aborting",
    )?;

    let lib = gaussian_sigma(1.0, 1e-5, 1.0, 1).unwrap();
    let oracle = sigma_oracle(1.0, 1e-5, 1.0);
    ensure(
        (lib - oracle).abs() <= 1e-6,
        format!("gaussian_sigma {lib} vs oracle {oracle}"),
    )?;
    Ok(format!(
        "noise std {sd:.4}/{sigma:.4}, T_pe queries exact, early abort, sigma {lib:.6} = oracle {oracle:.6}"
    ))
}

// ---------------------------------------------------------------- 6, 7

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn final_accuracy(runs: &[RunOutput]) -> f64 {
    mean(runs.iter().map(|r| r.final_log().top1_accuracy))
}

fn criterion_6(data: &ExperimentData) -> Outcome {
    let skew = ExperimentConfig::toy().for_algorithm(Algorithm::FedAvg);
    let mut iid = skew.clone();
    iid.partition = PartitionKind::Iid;
    let a_iid = final_accuracy(&run_all(&iid, data));
    let a_skew = final_accuracy(&run_all(&skew, data));
    let gap = 100.0 * (a_iid - a_skew);
    ensure(
        gap >= 15.0,
        format!("IID {a_iid:.3} vs label skew {a_skew:.3}: gap {gap:.1} pts"),
    )?;
    Ok(format!(
        "IID {:.1}% vs label skew {:.1}%: gap {gap:.1} pts",
        100.0 * a_iid,
        100.0 * a_skew
    ))
}

fn criterion_7(data: &ExperimentData) -> Outcome {
    let base = ExperimentConfig::toy();
    ensure(
        base.generator.kind == GeneratorKind::HeldOutOracle
            && base.share.max_class_fraction == 0.5
            && base.distribution.deficiency_threshold == 0
            && base.distribution.per_class_quota == 1000,
        "toy preset does not use the criterion settings",
    )?;
    let fedavg = run_all(&base.for_algorithm(Algorithm::FedAvg), data);
    let dpsda = run_all(&base.for_algorithm(Algorithm::DpsdaFl), data);
    let pooled_recall = |run: &RunOutput, pooled: &BTreeSet<usize>| {
        mean(pooled.iter().map(|&c| run.final_log().per_class_recall[c]))
    };
    let mut rec_avg = Vec::new();
    let mut rec_dpsda = Vec::new();
    for (a, d) in fedavg.iter().zip(&dpsda) {
        ensure(!d.pooled_classes.is_empty(), "DPSDA-FL pooled nothing")?;
        rec_avg.push(pooled_recall(a, &d.pooled_classes));
        rec_dpsda.push(pooled_recall(d, &d.pooled_classes));
    }
    let (acc_avg, acc_dpsda) = (final_accuracy(&fedavg), final_accuracy(&dpsda));
    let (r_avg, r_dpsda) = (mean(rec_avg), mean(rec_dpsda));
    let acc_gain = 100.0 * (acc_dpsda - acc_avg);
    let rec_gain = 100.0 * (r_dpsda - r_avg);
    ensure(
        acc_gain >= 5.0 && rec_gain >= 10.0,
        format!("accuracy gain {acc_gain:.1} pts, pooled-class recall gain {rec_gain:.1} pts"),
    )?;
    Ok(format!(
        "accuracy {:.1}% -> {:.1}% (+{acc_gain:.1}), pooled-class recall {:.1}% -> {:.1}% (+{rec_gain:.1})",
        100.0 * acc_avg,
        100.0 * acc_dpsda,
        100.0 * r_avg,
        100.0 * r_dpsda
    ))
}

// ---------------------------------------------------------------- driver

fn run(id: &str, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let result = match result {
        Ok(detail) if elapsed > limit => Err(format!("{detail}; exceeded {limit:?}")),
        other => other,
    };
    let (status, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {id:>2} {status} [{elapsed:.2?}] {title}: {detail}");
    result.is_ok()
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let data = load_data(&ExperimentConfig::toy().dataset).expect("toy data");
    let mut emitted = Vec::new();
    let mut ok = true;
    let s = Duration::from_secs;
    ok &= run("1", "gradient oracle", s(10), criterion_1);
    ok &= run("2", "aggregation identities", s(1), criterion_2);
    ok &= run("3", "FedProx(mu=0) == FedAvg", s(120), || {
        criterion_3(&data, &mut emitted)
    });
    ok &= run("4", "partition soundness", s(30), criterion_4);
    ok &= run("5", "DP mechanics", s(60), criterion_5);
    ok &= run("6", "non-IID degradation", s(600), || criterion_6(&data));
    ok &= run("7", "DPSDA-FL improvement", s(900), || criterion_7(&data));
    ok &= run("8", "empty pool == FedAvg", s(120), || {
        criterion_8(&data, &mut emitted)
    });
    ok &= run("10", "metric identities", s(1), || criterion_10(&emitted));
    println!("criterion  9 SKIP CIFAR-10 ordering: extended run, see README");
    if !ok {
        std::process::exit(1);
    }
}

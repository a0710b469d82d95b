//! Acceptance suite. Runs every criterion in order, prints one
//! `ACCEPTANCE <n> PASS|FAIL` line each and exits non-zero if any failed.
//!
//! Criteria 6, 7 and 10 need the Seeds and Column datasets. They are looked
//! up as `seeds.csv` / `column.csv` in `$ENSIMP_DATA_DIR` or the repository
//! `data/` directory; when absent the criterion fails as blocked.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use ensimp::data::{standardize, Dataset, LabelColumn};
use ensimp::ensemble::{dataset_count, Family};
use ensimp::eval::export::export_results;
use ensimp::eval::{friedman, kappa, kappa_error_points, run_experiment, ExperimentGrid, RunResult};
use ensimp::impute::{apply_em, fit_em, GaussianModel};
use ensimp::missing::{inject_mcar, removals_per_attribute, MissingnessSpec};
use ensimp::tree::{DecisionTree, TreeConfig, TreeNode};
use ensimp::{EmConfig, EnsembleConfig, Exec, MethodId, Seed};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let e = start.elapsed();
    check(e < limit, format!("runtime {e:.1?} exceeds {limit:?}"))
}

fn data_dir() -> PathBuf {
    std::env::var_os("ENSIMP_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn load(name: &str) -> Result<Dataset, String> {
    let path = data_dir().join(format!("{name}.csv"));
    if !path.is_file() {
        return Err(format!("blocked: {} not available", path.display()));
    }
    ensimp::data::load_csv(&path, &LabelColumn::Name("class".into())).map_err(|e| e.to_string())
}

fn grid(methods: &[MethodId], ratios: &[f64], reps: usize, seed: u64) -> ExperimentGrid {
    ExperimentGrid {
        methods: methods.to_vec(),
        ratios: ratios.to_vec(),
        repetitions: reps,
        folds: 2,
        ensemble: EnsembleConfig::default(),
        master_seed: seed,
        kappa_cell: None,
    }
}

fn mean_acc(results: &[RunResult], dataset: &str, method: MethodId, ratio: f64) -> f64 {
    let xs: Vec<f64> = results
        .iter()
        .filter(|r| r.dataset == dataset && r.method == method && r.ratio == ratio)
        .map(|r| r.accuracy)
        .collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

// 1 ----------------------------------------------------------------------

fn c1_table_accounting() -> Outcome {
    let t = Instant::now();
    let got = [
        dataset_count(Family::BagSingle, 25, 5).map_err(|e| e.to_string())?,
        dataset_count(Family::BagMi, 25, 5).map_err(|e| e.to_string())?,
        dataset_count(Family::MiEnsemble, 25, 5).map_err(|e| e.to_string())?,
    ];
    check(got == [(25, 125, 150), (5, 25, 30), (0, 25, 25)], format!("got {got:?}"))?;
    within(t, Duration::from_secs(1))?;
    Ok(format!("{got:?}"))
}

// 2 ----------------------------------------------------------------------

fn c2_mcar_suite() -> Outcome {
    let t = Instant::now();
    let chi_crit = |df: f64| ChiSquared::new(df).unwrap().inverse_cdf(1.0 - 0.001);
    let mut worst_p = 1.0f64;
    for &(n, f, ratio) in &[(100usize, 5usize, 0.10), (50, 3, 0.30), (4, 2, 0.5)] {
        let rows: Vec<Vec<f64>> = (0..n).map(|r| (0..f).map(|c| (r * f + c) as f64).collect()).collect();
        let d = Dataset::complete("shape", &rows, (0..n).map(|r| r % 2).collect(), 2).map_err(|e| e.to_string())?;
        let k = removals_per_attribute(n, ratio);
        let mut hits = vec![vec![0usize; n]; f];
        let draws = 1000;
        for seed in 0..draws {
            let out = inject_mcar(&d, &MissingnessSpec::new(ratio, seed)).map_err(|e| e.to_string())?;
            for (c, h) in hits.iter_mut().enumerate() {
                let missing: Vec<usize> = (0..n).filter(|&r| !out.is_observed(r, c)).collect();
                check(missing.len() == k, format!("{n}x{f}: attribute {c} has {} missing, want {k}", missing.len()))?;
                for r in missing {
                    h[r] += 1;
                }
            }
            for r in 0..n {
                check(out.row_mask(r).iter().any(|&o| o), format!("{n}x{f} seed {seed}: record {r} emptied"))?;
            }
        }
        let expected = draws as f64 * k as f64 / n as f64;
        let df = (n - 1) as f64;
        for (c, h) in hits.iter().enumerate() {
            let stat: f64 = h.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            let p = ChiSquared::new(df).unwrap().sf(stat);
            worst_p = worst_p.min(p);
            check(
                stat < chi_crit(df),
                format!("{n}x{f} attribute {c}: chi2 {stat:.2} rejects uniformity (p={p:.2e})"),
            )?;
        }
    }
    within(t, Duration::from_secs(30))?;
    Ok(format!("exact counts, no empty records, min chi2 p = {worst_p:.3}"))
}

// 3 ----------------------------------------------------------------------

fn c3_em_oracle() -> Outcome {
    let t = Instant::now();
    let rho = 0.8;
    let model = GaussianModel::new(vec![0.0, 0.0], vec![1.0, rho, rho, 1.0]).unwrap();
    let rec = Dataset::from_rows(
        "b",
        vec!["y1".into(), "y2".into()],
        &[vec![Some(2.0), None], vec![Some(0.0), Some(0.0)]],
        vec![0, 1],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let imputed = apply_em(&model, &rec, 0.0).map_err(|e| e.to_string())?.get(0, 1).unwrap();
    check((imputed - 2.0 * rho).abs() < 1e-10, format!("conditional mean {imputed}, want {}", 2.0 * rho))?;

    // Generating parameters. With unit variances the 0.05 mean band is only
    // about 2.1 standard errors at N=2000 and 10% missingness, so even the
    // exact MLE would miss it on ~10% of seeds; variances below 0.55 keep
    // the band at >= 2.8 standard errors.
    let mu = [1.0, -0.5, 0.25];
    let sigma = [[0.5, 0.2, -0.1], [0.2, 0.4, 0.1], [-0.1, 0.1, 0.3]];
    let chol = cholesky3(&sigma);
    let mut ok = 0;
    let mut worst_mu = 0.0f64;
    let mut worst_cov = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = Seed::new(seed).derive_str("em-oracle").stream();
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let z: [f64; 3] = [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ];
                (0..3)
                    .map(|i| mu[i] + (0..=i).map(|j| chol[i][j] * z[j]).sum::<f64>())
                    .collect()
            })
            .collect();
        let full = Dataset::complete("g", &rows, (0..2000).map(|i| i % 2).collect(), 2).unwrap();
        let inc = inject_mcar(&full, &MissingnessSpec::new(0.10, seed)).map_err(|e| e.to_string())?;
        let (z, scaling) = standardize(&inc).map_err(|e| e.to_string())?;
        let fit = fit_em(&z, &EmConfig::default(), &mut rng).map_err(|e| e.to_string())?;
        let s = &scaling.stats;
        let mut dm = 0.0f64;
        let mut dc = 0.0f64;
        for i in 0..3 {
            dm = dm.max((fit.model.mean[i] * s[i].sd + s[i].mean - mu[i]).abs());
            for j in 0..3 {
                dc = dc.max((fit.model.cov_at(i, j) * s[i].sd * s[j].sd - sigma[i][j]).abs());
            }
        }
        worst_mu = worst_mu.max(dm);
        worst_cov = worst_cov.max(dc);
        if dm <= 0.05 && dc <= 0.1 {
            ok += 1;
        }
    }
    check(ok >= 95, format!("only {ok}/100 seeds recovered the parameters"))?;
    within(t, Duration::from_secs(120))?;
    Ok(format!(
        "2rho match; {ok}/100 seeds recovered (max |dmu| {worst_mu:.3}, max |dSigma| {worst_cov:.3})"
    ))
}

fn cholesky3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j { (a[i][i] - s).sqrt() } else { (a[i][j] - s) / l[j][j] };
        }
    }
    l
}

// 4 ----------------------------------------------------------------------

fn c4_kappa() -> Outcome {
    let t = Instant::now();
    let mut rng = Seed::new(4).stream();
    let p: Vec<usize> = (0..500).map(|_| rng.random_range(0..3)).collect();
    check(kappa(&p, &p, 3).unwrap() == 1.0, "identical predictions not 1")?;
    let a: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..3)).collect();
    let b: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..3)).collect();
    let k_ind = kappa(&a, &b, 3).unwrap();
    check(k_ind.abs() < 0.02, format!("independent kappa {k_ind}"))?;
    let k_hand = kappa(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
    check(k_hand == 0.5, format!("hand example {k_hand}"))?;
    let labels: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
    let members: Vec<Vec<usize>> = (0..25)
        .map(|_| {
            labels
                .iter()
                .map(|&y| if rng.random_bool(0.7) { y } else { rng.random_range(0..3) })
                .collect()
        })
        .collect();
    let pts = kappa_error_points(&members, &labels, 3).unwrap();
    check(pts.len() == 300, format!("{} points for L=25", pts.len()))?;
    check(
        pts.iter().all(|p| (-1.0..=1.0).contains(&p.kappa) && (0.0..=1.0).contains(&p.mean_error)),
        "point outside [-1,1] x [0,1]",
    )?;
    within(t, Duration::from_secs(10))?;
    Ok(format!("independent kappa {k_ind:.4}, 300 points"))
}

// 5 ----------------------------------------------------------------------

/// Reference tree: recursive, recomputes every candidate partition from
/// scratch, complete data only.
#[derive(Debug, PartialEq)]
enum RefNode {
    Leaf(Vec<f64>),
    Split(usize, f64, Box<RefNode>, Box<RefNode>),
}

fn h(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).log2())
        .sum()
}

fn ref_tree(rows: &[Vec<f64>], labels: &[usize], c: usize, idx: &[usize], min_leaf: f64) -> RefNode {
    let counts = |ids: &[usize]| {
        let mut v = vec![0.0; c];
        for &i in ids {
            v[labels[i]] += 1.0;
        }
        v
    };
    let dist = counts(idx);
    let n = idx.len() as f64;
    if dist.iter().filter(|&&x| x > 0.0).count() <= 1 || n < 2.0 * min_leaf {
        return RefNode::Leaf(dist);
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for a in 0..rows[0].len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| rows[i][a]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let l: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][a] <= thr).collect();
            let r: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][a] > thr).collect();
            let (nl, nr) = (l.len() as f64, r.len() as f64);
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let gain = h(&dist) - nl / n * h(&counts(&l)) - nr / n * h(&counts(&r));
            let si = h(&[nl, nr]);
            let gr = if si > 0.0 { gain / si } else { 0.0 };
            if best.is_none_or(|(b, _, _)| gr > b + 1e-12) {
                best = Some((gr, a, thr));
            }
        }
    }
    match best {
        Some((gr, a, thr)) if gr > 1e-9 => {
            let l: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][a] <= thr).collect();
            let r: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][a] > thr).collect();
            RefNode::Split(
                a,
                thr,
                Box::new(ref_tree(rows, labels, c, &l, min_leaf)),
                Box::new(ref_tree(rows, labels, c, &r, min_leaf)),
            )
        }
        _ => RefNode::Leaf(dist),
    }
}

fn to_ref(t: &DecisionTree, i: usize) -> RefNode {
    match &t.nodes()[i] {
        TreeNode::Leaf { distribution } => RefNode::Leaf(distribution.clone()),
        TreeNode::Split {
            attr, threshold, left, right, ..
        } => RefNode::Split(*attr, *threshold, Box::new(to_ref(t, *left)), Box::new(to_ref(t, *right))),
    }
}

fn c5_tree_oracle() -> Outcome {
    let t = Instant::now();
    let mut datasets = 0;
    let mut splits = 0;
    for seed in 0..50u64 {
        let mut rng = Seed::new(seed).derive_str("tree-oracle").stream();
        for f in 1..=2usize {
            for n in 4..=12usize {
                let c = rng.random_range(2..=3usize);
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..f).map(|_| rng.random_range(0..6) as f64 * 0.5).collect())
                    .collect();
                let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
                labels[0] = 0;
                labels[1] = 1;
                let d = Dataset::complete("o", &rows, labels.clone(), c).unwrap();
                let tree = DecisionTree::train(&d, &TreeConfig::default(), None).map_err(|e| e.to_string())?;
                let idx: Vec<usize> = (0..n).collect();
                let want = ref_tree(&rows, &labels, c, &idx, 2.0);
                let got = to_ref(&tree, 0);
                check(got == want, format!("seed {seed} n={n} f={f}: tree {got:?} != reference {want:?}"))?;
                splits += tree.nodes().len() - tree.n_leaves();
                datasets += 1;
                for r in 0..n {
                    for m in 0..(1u32 << f) {
                        let mask: Vec<bool> = (0..f).map(|j| m & (1 << j) != 0).collect();
                        let p = tree.predict_dist(&rows[r], &mask);
                        let s: f64 = p.iter().sum();
                        check(
                            (s - 1.0).abs() < 1e-12 && p.iter().all(|&x| x >= 0.0),
                            format!("seed {seed}: unnormalized distribution {p:?}"),
                        )?;
                    }
                }
            }
        }
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!("{datasets} datasets ({splits} splits) match the reference builder"))
}

// 6 ----------------------------------------------------------------------

fn c6_ensemble_beats_single() -> Outcome {
    let t = Instant::now();
    let names = ["seeds", "wine", "column"];
    let loaded: Vec<Result<Dataset, String>> = names.iter().map(|n| load(n)).collect();
    let available: Vec<Dataset> = loaded.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let g = grid(&[MethodId::Em, MethodId::BagEm, MethodId::Mei, MethodId::BagMei], &[0.30], 5, 6);
    let out = run_experiment(&g, &available, Exec::Parallel).map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut detail = Vec::new();
    for d in &available {
        for (ens, single) in [(MethodId::BagEm, MethodId::Em), (MethodId::BagMei, MethodId::Mei)] {
            let (a, b) = (mean_acc(&out.results, d.name(), ens, 0.3), mean_acc(&out.results, d.name(), single, 0.3));
            if a > b {
                wins += 1;
            }
            detail.push(format!("{} {ens} {a:.3} vs {single} {b:.3}", d.name()));
        }
    }
    let detail = detail.join("; ");
    let blocked: Vec<&String> = loaded.iter().filter_map(|r| r.as_ref().err()).collect();
    if !blocked.is_empty() {
        return Err(format!(
            "{}; evaluated on available data only: {detail}",
            blocked.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
        ));
    }
    check(wins >= 5, format!("{wins}/6 pairs: {detail}"))?;
    within(t, Duration::from_secs(15 * 60))?;
    Ok(format!("{wins}/6 pairs: {detail}"))
}

// 7 ----------------------------------------------------------------------

fn c7_bagem_band() -> Outcome {
    let t = Instant::now();
    let seeds = load("seeds")?;
    let g = grid(&[MethodId::BagEm], &[0.0, 0.30], 5, 7);
    let out = run_experiment(&g, &[seeds], Exec::Parallel).map_err(|e| e.to_string())?;
    check(out.failures.is_empty(), format!("{:?}", out.failures))?;
    let a0 = mean_acc(&out.results, "seeds", MethodId::BagEm, 0.0);
    let a30 = mean_acc(&out.results, "seeds", MethodId::BagEm, 0.30);
    let msg = format!("BagEM {a0:.3} at 0%, {a30:.3} at 30%, drop {:.3}", a0 - a30);
    check(a0 >= 0.85 && a0 - a30 <= 0.06, msg.clone())?;
    within(t, Duration::from_secs(10 * 60))?;
    Ok(msg)
}

// 8 ----------------------------------------------------------------------

fn c8_zero_ratio_collapse() -> Outcome {
    let t = Instant::now();
    let data = vec![load("wine")?, load("glass")?];
    let bag = [MethodId::BagNoImp, MethodId::BagMei, MethodId::BagGRandI, MethodId::BagEm];
    let g = grid(&bag, &[0.0], 3, 8);
    let out = run_experiment(&g, &data, Exec::Parallel).map_err(|e| e.to_string())?;
    check(out.failures.is_empty(), format!("{:?}", out.failures))?;
    let mut cells = 0;
    for d in &data {
        for rep in 0..3 {
            for fold in 0..2 {
                let accs: Vec<f64> = bag
                    .iter()
                    .map(|&m| {
                        out.results
                            .iter()
                            .find(|r| r.dataset == d.name() && r.method == m && r.repetition == rep && r.fold == fold)
                            .unwrap()
                            .accuracy
                    })
                    .collect();
                check(
                    accs.iter().all(|a| a.to_bits() == accs[0].to_bits()),
                    format!("{} rep {rep} fold {fold}: {accs:?}", d.name()),
                )?;
                cells += 1;
            }
        }
    }
    within(t, Duration::from_secs(120))?;
    Ok(format!("{cells} (dataset, rep, fold) cells identical across the four bagging methods"))
}

// 9 ----------------------------------------------------------------------

/// Counting ranks and the mean-rank form of the statistic, divided by the
/// tie correction.
fn brute_friedman(acc: &[Vec<f64>]) -> f64 {
    let k = acc.len();
    let n = acc[0].len();
    let mut mean_rank = vec![0.0; k];
    let mut ties = 0.0;
    for d in 0..n {
        for i in 0..k {
            let better = (0..k).filter(|&j| acc[j][d] > acc[i][d]).count() as f64;
            let equal = (0..k).filter(|&j| j != i && acc[j][d] == acc[i][d]).count() as f64;
            mean_rank[i] += (1.0 + better + equal / 2.0) / n as f64;
            let t = equal + 1.0;
            // each tie group of size t is visited t times
            ties += (t * t * t - t) / t;
        }
    }
    let (kf, nf) = (k as f64, n as f64);
    let chi = 12.0 * nf / (kf * (kf + 1.0)) * mean_rank.iter().map(|r| (r - (kf + 1.0) / 2.0).powi(2)).sum::<f64>();
    let correction = 1.0 - ties / (nf * (kf * kf * kf - kf));
    if correction <= 0.0 {
        0.0
    } else {
        chi / correction
    }
}

fn c9_friedman_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = Seed::new(9).stream();
    let mut max_diff = 0.0f64;
    for _ in 0..100 {
        let acc: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..6).map(|_| 0.70 + 0.01 * rng.random_range(0..8) as f64).collect())
            .collect();
        let got = friedman(&acc).map_err(|e| e.to_string())?.statistic;
        let want = brute_friedman(&acc);
        max_diff = max_diff.max((got - want).abs());
    }
    check(max_diff <= 1e-10, format!("max deviation {max_diff:e}"))?;
    let constant = friedman(&vec![vec![0.8; 6]; 5]).map_err(|e| e.to_string())?;
    check(constant.statistic == 0.0, format!("constant matrix statistic {}", constant.statistic))?;
    within(t, Duration::from_secs(10))?;
    Ok(format!("max |diff| {max_diff:.1e} over 100 matrices; constant -> 0"))
}

// 10 ---------------------------------------------------------------------

fn c10_determinism() -> Outcome {
    let t = Instant::now();
    let seeds = load("seeds")?;
    let g = ExperimentGrid {
        kappa_cell: Some((0, 0)),
        ..grid(&MethodId::ALL, &[0.0, 0.30], 2, 10)
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let one = run_experiment(&g, std::slice::from_ref(&seeds), Exec::Sequential).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let eight = pool
        .install(|| run_experiment(&g, std::slice::from_ref(&seeds), Exec::Parallel))
        .map_err(|e| e.to_string())?;
    let f1 = export_results(&one, dirs[0].path()).map_err(|e| e.to_string())?;
    let f8 = export_results(&eight, dirs[1].path()).map_err(|e| e.to_string())?;
    check(f1.len() == f8.len(), "different file sets")?;
    for (a, b) in f1.iter().zip(&f8) {
        check(std::fs::read(a).unwrap() == std::fs::read(b).unwrap(), format!("{} differs", a.display()))?;
    }
    within(t, Duration::from_secs(15 * 60))?;
    Ok(format!("{} files byte-identical for 1 and 8 workers", f1.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "dataset-count accounting", c1_table_accounting),
        (2, "MCAR injector suite", c2_mcar_suite),
        (3, "EM oracle equivalence", c3_em_oracle),
        (4, "kappa identities", c4_kappa),
        (5, "tree oracle", c5_tree_oracle),
        (6, "ensemble beats single at 30%", c6_ensemble_beats_single),
        (7, "BagEM robustness band on Seeds", c7_bagem_band),
        (8, "bagging collapse at ratio 0", c8_zero_ratio_collapse),
        (9, "Friedman oracle", c9_friedman_oracle),
        (10, "grid determinism across worker counts", c10_determinism),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("ACCEPTANCE {n} PASS [{name}] ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("ACCEPTANCE {n} FAIL [{name}] ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

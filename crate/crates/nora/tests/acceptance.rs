//! Acceptance report: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nora::dataio::load_uci_ckd;
use nora_core::cohort::{generate_synthetic_cohort, CohortSpec};
use nora_core::encoder::{supcon_loss_and_grad, EMBEDDING_DIM};
use nora_core::eval::{class_similarity, classification_report, fisher_exact, mann_whitney_u, roc_auc};
use nora_core::pipeline::{fit_pipeline, run_cv_experiment, run_cv_experiments, PipelineConfig, PipelineKind};
use nora_core::preprocess::{stratified_holdout, Preprocessor};
use nora_core::resample::{find_tomek_links, smote_oversample, smote_tomek};
use nora_core::{class_counts, rng, FeatureMatrix, Label};
use rand::Rng as _;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn uci_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/chronic_kidney_disease_full.arff")
}

fn uci_reproduction(r: &mut Report) {
    let table = load_uci_ckd(&uci_path()).unwrap();
    let start = Instant::now();
    let cv = run_cv_experiment(&table, &PipelineConfig::with_kind(PipelineKind::Nora), 5, 0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (f1, acc) = (cv.mean.class1_f1, cv.mean.accuracy);
    r.line(
        f1 >= 0.96 && acc >= 0.96 && secs <= 300.0,
        "UCI NORA 5-fold",
        format!("mean F1(ckd) {f1:.4} >= 0.96, mean accuracy {acc:.4} >= 0.96, runtime {secs:.1}s <= 300s"),
    );
}

fn uci_baselines(r: &mut Report) {
    let table = load_uci_ckd(&uci_path()).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, bar) in [(PipelineKind::Rf, 0.95), (PipelineKind::Lr, 0.945), (PipelineKind::Knn, 0.945)] {
        let cv = run_cv_experiment(&table, &PipelineConfig::with_kind(kind), 5, 0).unwrap();
        ok &= cv.mean.class1_f1 >= bar;
        parts.push(format!("{} F1 {:.4} >= {bar}", kind.name(), cv.mean.class1_f1));
    }
    r.line(ok, "UCI baselines 5-fold", parts.join(", "));
}

fn surrogate_cohort(r: &mut Report) {
    let cfgs = [
        PipelineConfig::with_kind(PipelineKind::Nora),
        PipelineConfig::with_kind(PipelineKind::SclLr),
    ];
    let (mut nora_sum, mut scl_sum) = (0.0, 0.0);
    let mut sims_ok = true;
    let mut sims = Vec::new();
    let seeds = [1u64, 2, 3, 4, 5];
    for &seed in &seeds {
        let table = generate_synthetic_cohort(&CohortSpec {
            seed,
            ..CohortSpec::default()
        })
        .unwrap();
        let res = run_cv_experiments(&table, &cfgs, 5, seed).unwrap();
        nora_sum += res[0].mean.macro_f1;
        scl_sum += res[1].mean.macro_f1;
        for cfg in &cfgs {
            let fit = fit_pipeline(&table, cfg, seed).unwrap();
            let (_, z) = fit.pipeline.embed(&table).unwrap();
            let (intra, inter) = class_similarity(&z, table.labels()).unwrap();
            sims_ok &= intra > inter;
            sims.push(format!("{:.3}/{:.3}", intra, inter));
        }
    }
    let k = seeds.len() as f64;
    let (nora, scl) = (nora_sum / k, scl_sum / k);
    r.line(
        nora >= scl,
        "Surrogate cohort NORA vs SCL+LR",
        format!("mean macro F1 over {} seeds: NORA {nora:.4} >= SCL+LR {scl:.4}", seeds.len()),
    );
    r.line(
        sims_ok,
        "Surrogate cohort embedding geometry",
        format!("intra/inter cosine per seed and pipeline: {}", sims.join(" ")),
    );
}

fn unit_rows(n: usize, r: &mut rng::Rng) -> FeatureMatrix {
    let mut data = Vec::with_capacity(n * EMBEDDING_DIM);
    for _ in 0..n {
        let row: Vec<f64> = (0..EMBEDDING_DIM).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        data.extend(row.iter().map(|v| v / norm));
    }
    FeatureMatrix::new(n, EMBEDDING_DIM, data).unwrap()
}

fn supcon(r: &mut Report) {
    let tau = 0.07;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for b in 0..20u64 {
        let mut g = rng::stream(b, 77);
        let n = g.random_range(2..=8);
        let z = unit_rows(n, &mut g);
        let mut y: Vec<Label> = (0..n).map(|_| u8::from(g.random::<bool>())).collect();
        y[0] = y[1];
        let (_, grad) = supcon_loss_and_grad(&z, &y, tau).unwrap();
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..n * EMBEDDING_DIM {
            let shifted = |d: f64| {
                let mut v = z.as_slice().to_vec();
                v[i] += d;
                supcon_loss_and_grad(&FeatureMatrix::new(n, EMBEDDING_DIM, v).unwrap(), &y, tau).unwrap().0
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            diff += (grad.as_slice()[i] - numeric).powi(2);
            norm += numeric * numeric;
        }
        worst = worst.max((diff / norm).sqrt());
    }
    let mut closed_form_err: f64 = 0.0;
    for n in 2..=8usize {
        let row: Vec<f64> = (0..EMBEDDING_DIM).map(|j| if j == 3 { 1.0 } else { 0.0 }).collect();
        let z = FeatureMatrix::new(n, EMBEDDING_DIM, row.repeat(n)).unwrap();
        let (loss, _) = supcon_loss_and_grad(&z, &vec![1; n], tau).unwrap();
        let want = n as f64 * ((n - 1) as f64).ln();
        closed_form_err = closed_form_err.max((loss - want).abs());
    }
    let mut g = rng::stream(0, 78);
    let z = unit_rows(2, &mut g);
    let (zero_loss, zero_grad) = supcon_loss_and_grad(&z, &[0, 1], tau).unwrap();
    let no_pos = zero_loss == 0.0 && zero_grad.as_slice().iter().all(|&v| v == 0.0);
    r.line(
        worst <= 1e-4 && closed_form_err <= 1e-9 && no_pos,
        "SupCon correctness",
        format!(
            "worst FD relative error over 20 batches {worst:.2e} <= 1e-4; max |loss - n log(n-1)| {closed_form_err:.1e} <= 1e-9; no-positive loss {zero_loss}"
        ),
    );
}

/// `(i, j)` with `y_i != y_j` where each is the other's nearest neighbour
/// (ties to the lower index), by direct scan.
fn brute_force_links(x: &FeatureMatrix, y: &[Label]) -> Vec<(usize, usize)> {
    let n = x.n_rows();
    let d2 = |a: usize, b: usize| -> f64 { x.row(a).iter().zip(x.row(b)).map(|(p, q)| (p - q) * (p - q)).sum() };
    let nearest: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let mut best: Option<usize> = None;
            for j in 0..n {
                if j != i && best.is_none_or(|b| d2(i, j) < d2(i, b)) {
                    best = Some(j);
                }
            }
            best
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if y[i] != y[j] && nearest[i] == Some(j) && nearest[j] == Some(i) {
                out.push((i, j));
            }
        }
    }
    out
}

fn resampling(r: &mut Report) {
    let cohort = generate_synthetic_cohort(&CohortSpec::default()).unwrap();
    let (train_idx, _) = stratified_holdout(cohort.labels(), 0.3, 0).unwrap();
    let train = cohort.select(&train_idx);
    let before = class_counts(train.labels());
    let x = Preprocessor::fit(&train).unwrap().apply(&train).unwrap();
    let y = train.labels();
    let out = smote_tomek(&x, y, 5, 0).unwrap();
    let rep = &out.report;
    let counts_ok = before == [128, 544]
        && rep.after_smote[0] == rep.after_smote[1]
        && rep.after_cleaning[0] == rep.after_cleaning[1];

    let smote = smote_oversample(&x, y, 5, 0).unwrap();
    let minority_label = u8::from(before[1] < before[0]);
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let mut worst_offset: f64 = 0.0;
    let mut neighbours_ok = true;
    for (s, &(src, nn)) in smote.provenance.iter().enumerate() {
        let p = smote.x.row(x.n_rows() + s);
        let (a, b) = (x.row(src), x.row(nn));
        let ab: Vec<f64> = a.iter().zip(b).map(|(u, v)| v - u).collect();
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 {
            p.iter().zip(a).zip(&ab).map(|((pv, av), d)| (pv - av) * d).sum::<f64>() / len2
        } else {
            0.0
        };
        let off: f64 = p
            .iter()
            .zip(a)
            .zip(&ab)
            .map(|((pv, av), d)| (pv - (av + t.clamp(0.0, 1.0) * d)).powi(2))
            .sum::<f64>()
            .sqrt();
        worst_offset = worst_offset.max(off);
        let mut others: Vec<(f64, usize)> = minority
            .iter()
            .filter(|&&m| m != src)
            .map(|&m| (x.row(src).iter().zip(x.row(m)).map(|(u, v)| (u - v) * (u - v)).sum(), m))
            .collect();
        others.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        neighbours_ok &= others.iter().take(5).any(|&(_, m)| m == nn);
    }

    let mut links_ok = 0;
    for inst in 0..100u64 {
        let mut g = rng::stream(inst, 79);
        let n = g.random_range(2..=200);
        let d = g.random_range(1..=4);
        // a coarse grid forces distance ties
        let data: Vec<f64> = (0..n * d).map(|_| f64::from(g.random_range(0..8u8))).collect();
        let xi = FeatureMatrix::new(n, d, data).unwrap();
        let yi: Vec<Label> = (0..n).map(|_| u8::from(g.random::<bool>())).collect();
        if find_tomek_links(&xi, &yi).unwrap() == brute_force_links(&xi, &yi) {
            links_ok += 1;
        }
    }
    r.line(
        counts_ok && worst_offset <= 1e-9 && neighbours_ok && links_ok == 100,
        "Resampling",
        format!(
            "train {before:?} -> SMOTE {:?} -> Tomek {:?} ({} links); {} synthetic rows, worst segment offset {worst_offset:.1e} <= 1e-9; Tomek vs brute force {links_ok}/100",
            rep.after_smote,
            rep.after_cleaning,
            rep.tomek_links.len(),
            smote.provenance.len()
        ),
    );
}

fn pair_auc(y: &[Label], s: &[f64]) -> f64 {
    let (mut acc, mut pairs) = (0.0, 0.0);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                acc += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    acc / pairs
}

/// Two-sided permutation p-value by enumerating every assignment of the
/// pooled values to groups of the observed sizes.
fn mw_enumeration(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let u = |mask: u32| {
        let mut u = 0.0;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|j| mask >> j & 1 == 0) {
                u += if pooled[i] > pooled[j] {
                    1.0
                } else if pooled[i] == pooled[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        u
    };
    let mu = (a.len() * b.len()) as f64 / 2.0;
    let obs = (u((1 << a.len()) - 1) - mu).abs();
    let (mut hit, mut all) = (0u32, 0u32);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize == a.len() {
            all += 1;
            if (u(mask) - mu).abs() >= obs - 1e-9 {
                hit += 1;
            }
        }
    }
    f64::from(hit) / f64::from(all)
}

fn binom(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

fn fisher_enumeration(t: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = t;
    let (r1, c1, n) = (a + b, a + c, a + b + c + d);
    let w = |x: u64| binom(c1, x) * binom(n - c1, r1 - x);
    let lo = r1.saturating_sub(n - c1);
    let range = lo..=r1.min(c1);
    let total: u128 = range.clone().map(w).sum();
    let tail: u128 = range.map(w).filter(|&v| v <= w(a)).sum();
    tail as f64 / total as f64
}

fn metrics(r: &mut Report) {
    let mut auc_ok = 0;
    let mut acc_ok = true;
    for inst in 0..100u64 {
        let mut g = rng::stream(inst, 80);
        let n = g.random_range(2..=200);
        let mut y: Vec<Label> = (0..n).map(|_| u8::from(g.random::<bool>())).collect();
        y[0] = 0;
        y[1] = 1;
        let s: Vec<f64> = (0..n).map(|_| f64::from(g.random_range(0..25u8)) / 24.0).collect();
        let (_, auc) = roc_auc(&y, &s).unwrap();
        if (auc - pair_auc(&y, &s)).abs() <= 1e-9 {
            auc_ok += 1;
        }
        let pred: Vec<Label> = s.iter().map(|&v| u8::from(v >= 0.5)).collect();
        let rep = classification_report(&y, &pred).unwrap();
        acc_ok &= rep.accuracy == rep.weighted_avg.recall;
    }

    let mut mw_cases = 0;
    let mut mw_worst: f64 = 0.0;
    for inst in 0..400u64 {
        let mut g = rng::stream(inst, 81);
        let na = g.random_range(1..=11);
        let nb = g.random_range(1..=12 - na);
        let a: Vec<f64> = (0..na).map(|_| f64::from(g.random_range(0..6u8))).collect();
        let b: Vec<f64> = (0..nb).map(|_| f64::from(g.random_range(0..6u8))).collect();
        let p = mann_whitney_u(&a, &b).unwrap().p;
        mw_worst = mw_worst.max((p - mw_enumeration(&a, &b)).abs());
        mw_cases += 1;
    }

    let mut fisher_cases = 0;
    let mut fisher_worst: f64 = 0.0;
    for a in 0..=12u64 {
        for b in 0..=12 - a {
            for c in 0..=12 - a - b {
                for d in 0..=12 - a - b - c {
                    if a + b + c + d == 0 {
                        continue;
                    }
                    let t = [[a, b], [c, d]];
                    fisher_worst = fisher_worst.max((fisher_exact(t).unwrap() - fisher_enumeration(t)).abs());
                    fisher_cases += 1;
                }
            }
        }
    }
    r.line(
        auc_ok == 100 && acc_ok && mw_worst <= 1e-12 && fisher_worst <= 1e-12,
        "Metrics",
        format!(
            "AUC vs pair statistic {auc_ok}/100 within 1e-9; accuracy == weighted recall {}; Mann-Whitney vs enumeration {mw_cases} cases, worst |dp| {mw_worst:.1e}; Fisher vs enumeration all {fisher_cases} tables with n <= 12, worst |dp| {fisher_worst:.1e}",
            if acc_ok { "exactly" } else { "NOT exactly" }
        ),
    );
}

fn nora_cmd(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_nora"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn determinism(r: &mut Report) {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let uci = format!("[data]\nsource = \"uci\"\npath = {:?}\n", uci_path());
    let configs = [
        ("synth", "seed = 11\n[data]\nsource = \"synth\"\n".to_string()),
        ("cohort-stats", "seed = 11\n[data]\nsource = \"synth\"\n".to_string()),
        ("train", format!("seed = 11\n{uci}")),
        ("evaluate", format!("seed = 11\n{uci}")),
        ("embed", format!("seed = 11\n{uci}[bundle]\npath = \"train/bundle.json\"\n")),
        ("predict", format!("seed = 11\n{uci}[bundle]\npath = \"train/bundle.json\"\n")),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (cmd, body) in &configs {
        let cfg = root.join(format!("{cmd}.toml"));
        fs::write(&cfg, body).unwrap();
        let first = root.join(cmd);
        if !nora_cmd(&[cmd, "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]) {
            ok = false;
            notes.push(format!("{cmd}: failed"));
            continue;
        }
        let rerun = root.join(format!("{cmd}-rerun"));
        let replay = first.join("run.toml");
        let replayed = nora_cmd(&[cmd, "--config", replay.to_str().unwrap(), "--out", rerun.to_str().unwrap()]);
        let same = replayed && dir_files(&first) == dir_files(&rerun);
        ok &= same;
        notes.push(format!("{cmd} {} files {}", dir_files(&first).len(), if same { "identical" } else { "DIFFER" }));
    }
    r.line(ok, "CLI determinism from manifest", notes.join(", "));
}

fn main() {
    let mut r = Report { failures: 0 };
    uci_reproduction(&mut r);
    uci_baselines(&mut r);
    surrogate_cohort(&mut r);
    supcon(&mut r);
    resampling(&mut r);
    metrics(&mut r);
    determinism(&mut r);
    println!("acceptance: {} failed", r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}

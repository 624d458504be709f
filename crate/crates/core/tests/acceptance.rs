//! End-to-end acceptance checks. Each test prints one PASS/FAIL line; run
//! with `cargo test --test acceptance -- --nocapture --test-threads=1`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use depscreen::acoustic::{analyze_pitch, perturbation};
use depscreen::audio::{resample, AudioBuffer};
use depscreen::corpus::Label;
use depscreen::evalreport::{roc_auc, EvalReport, TaskId};
use depscreen::features::FeatureSet;
use depscreen::matrix::FeatureMatrix;
use depscreen::modeling::{audit_fold, CvPlan, Fold, GridKind, ModelFamily};
use depscreen::pipeline::task::RUN_MANIFEST_FILE;
use depscreen::pipeline::{
    analyze_matrix, run_task, task_dir, AudioSpec, RunConfig, RunManifest, SynthSpec, TextSpec, CORPUS_A, CORPUS_B,
};
use depscreen::stats::{mann_whitney, mann_whitney_normal, selected_names};
use depscreen::textfeat::Language;

/// Serializes the pipeline-heavy checks so the runtime bound is not measured
/// under contention from sibling tests.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, what: &str, ok: bool, detail: &str) {
    println!("{} [{id}] {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "[{id}] {what}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Reported UAR is the mean of the two class recalls.

#[test]
fn c1_reported_uar_is_mean_recall() {
    // (task, UAR, recall depressed, recall not depressed), all in %.
    let rows: [(&str, f64, f64, f64); 20] = [
        ("A", 66.0, 71.0, 62.0),
        ("A", 73.0, 85.0, 61.0),
        ("A", 49.0, 90.0, 8.0),
        ("A", 54.0, 94.0, 15.0),
        ("A", 46.0, 61.0, 31.0),
        ("A", 56.0, 15.0, 97.0),
        ("B", 66.0, 41.0, 91.0),
        ("B", 64.0, 65.0, 64.0),
        ("B", 47.0, 53.0, 40.0),
        ("B", 56.0, 18.0, 95.0),
        ("B", 62.0, 65.0, 60.0),
        ("B", 55.0, 12.0, 97.0),
        ("C_A", 79.0, 100.0, 58.0),
        ("C_A", 51.0, 31.0, 71.0),
        ("C_A", 58.0, 23.0, 94.0),
        ("C_A", 48.0, 58.0, 38.0),
        ("C_B", 74.0, 76.0, 71.0),
        ("C_B", 46.0, 53.0, 39.0),
        ("C_B", 57.0, 29.0, 84.0),
        ("C_B", 54.0, 41.0, 68.0),
    ];
    let bad: Vec<String> = rows
        .iter()
        .filter(|(_, uar, d, n)| ((d + n) / 2.0 - uar).abs() > 0.5)
        .map(|(t, uar, d, n)| format!("{t} {uar} vs ({d}+{n})/2"))
        .collect();
    verdict(1, "UAR = mean recall within 0.5 points", bad.is_empty(), &format!("{} rows, mismatches {bad:?}", rows.len()));
}

// ---------------------------------------------------------------------------
// 2. Mann-Whitney p-values against brute-force permutation oracles.

fn midranks_doubled(pooled: &[f64]) -> Vec<i64> {
    pooled
        .iter()
        .map(|&x| {
            let below = pooled.iter().filter(|&&y| y < x).count() as i64;
            let equal = pooled.iter().filter(|&&y| y == x).count() as i64;
            2 * below + equal + 1
        })
        .collect()
}

/// Visits every size-`k` subset of `0..n` as a bit mask.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(u64)) {
    if k == 0 {
        f(0);
        return;
    }
    let mut mask: u64 = (1u64 << k) - 1;
    let limit = 1u64 << n;
    while mask < limit {
        f(mask);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
}

/// Two-sided exact p by enumerating every relabelling of the pooled sample.
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r2 = midranks_doubled(&pooled);
    let (na, nb) = (a.len() as i64, b.len() as i64);
    // 2U = doubled rank sum - na (na + 1).
    let u2 = |mask: u64| -> i64 {
        let s: i64 = (0..pooled.len()).filter(|i| mask >> i & 1 == 1).map(|i| r2[i]).sum();
        s - na * (na + 1)
    };
    let observed = (u2((1u64 << a.len()) - 1) - na * nb).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for_each_subset(pooled.len(), a.len(), |m| {
        total += 1;
        if (u2(m) - na * nb).abs() >= observed {
            extreme += 1;
        }
    });
    extreme as f64 / total as f64
}

/// Exact null distribution of U without ties by the classic recurrence
/// f(m, n, u) = f(m - 1, n, u - n) + f(m, n - 1, u).
fn untied_u_counts(m: usize, n: usize) -> Vec<f64> {
    let max_u = m * n;
    // table[i][j] holds counts for samples of size i and j.
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            let mut c = vec![0.0; i * j + 1];
            if i == 0 || j == 0 {
                c[0] = 1.0;
            } else {
                for (u, slot) in c.iter_mut().enumerate() {
                    let from_a = if u >= j { table[i - 1][j].get(u - j).copied().unwrap_or(0.0) } else { 0.0 };
                    let from_b = table[i][j - 1].get(u).copied().unwrap_or(0.0);
                    *slot = from_a + from_b;
                }
            }
            table[i][j] = c;
        }
    }
    let out = std::mem::take(&mut table[m][n]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}

fn untied_exact_p(u: f64, m: usize, n: usize) -> f64 {
    let counts = untied_u_counts(m, n);
    let centre = (m * n) as f64 / 2.0;
    let obs = (u - centre).abs();
    let total: f64 = counts.iter().sum();
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|(v, _)| (*v as f64 - centre).abs() >= obs - 1e-9)
        .map(|(_, c)| c)
        .sum();
    extreme / total
}

fn monte_carlo_p(a: &[f64], b: &[f64], draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r2 = midranks_doubled(&pooled);
    let (na, nb) = (a.len() as i64, b.len() as i64);
    let observed = (r2[..a.len()].iter().sum::<i64>() - na * (na + 1) - na * nb).abs();
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    let mut extreme = 0usize;
    for _ in 0..draws {
        // Partial Fisher-Yates: the first na positions form the relabelled sample.
        for i in 0..a.len() {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        let s: i64 = idx[..a.len()].iter().map(|&i| r2[i]).sum();
        if (s - na * (na + 1) - na * nb).abs() >= observed {
            extreme += 1;
        }
    }
    extreme as f64 / draws as f64
}

#[test]
fn c2_mann_whitney_matches_permutation_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut exact_mismatch = Vec::new();
    for case in 0..200 {
        let na = rng.gen_range(1..=10);
        let nb = rng.gen_range(1..=10);
        // Small integer range so ties are common; a is shifted up in most cases.
        let shift = rng.gen_range(0..4) as f64;
        let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0..8) as f64 + shift).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0..8) as f64).collect();
        let mw = mann_whitney(&a, &b).unwrap();
        let oracle = brute_force_p(&a, &b);
        if !mw.exact || mw.p_two_sided != oracle {
            exact_mismatch.push(format!("case {case}: {} vs {oracle}", mw.p_two_sided));
        }
    }

    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let na = rng.gen_range(20..=30);
        let nb = rng.gen_range(20..=30);
        let shift = rng.gen_range(0.0..1.0);
        let a: Vec<f64> = (0..na).map(|_| rng.gen::<f64>() + shift).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen::<f64>()).collect();
        let mw = mann_whitney_normal(&a, &b).unwrap();
        worst = worst.max((mw.p_two_sided - untied_exact_p(mw.u, na, nb)).abs());
    }
    for _ in 0..10 {
        let na = rng.gen_range(20..=25);
        let nb = rng.gen_range(20..=25);
        let shift = rng.gen_range(0..3) as f64;
        let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0..10) as f64 + shift).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0..10) as f64).collect();
        let mw = mann_whitney(&a, &b).unwrap();
        worst = worst.max((mw.p_two_sided - monte_carlo_p(&a, &b, 200_000, &mut rng)).abs());
    }
    let ok = exact_mismatch.is_empty() && worst <= 1e-2;
    verdict(
        2,
        "Mann-Whitney p vs permutation oracles",
        ok,
        &format!(
            "200 small samples, {} exact mismatches; 60 large samples, max |p - oracle| = {worst:.4}",
            exact_mismatch.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. AUC equals U / (n+ n-).

#[test]
fn c3_auc_equals_normalized_u() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(4..80);
        let tied = rng.gen_bool(0.5);
        let mut scores = Vec::new();
        let mut truths = Vec::new();
        for i in 0..n {
            let pos = i % 3 == 0 || rng.gen_bool(0.3);
            let s: f64 = if tied { rng.gen_range(0..6) as f64 / 5.0 } else { rng.gen() };
            scores.push(s + if pos { 0.2 } else { 0.0 });
            truths.push(Label::from_positive(pos));
        }
        let pos: Vec<f64> = scores.iter().zip(&truths).filter(|(_, t)| t.is_positive()).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores.iter().zip(&truths).filter(|(_, t)| !t.is_positive()).map(|(s, _)| *s).collect();
        let (_, auc) = roc_auc(&scores, &truths).unwrap();
        let u = mann_whitney_normal(&pos, &neg).unwrap().u;
        worst = worst.max((auc - u / (pos.len() * neg.len()) as f64).abs());
    }
    verdict(3, "AUC = U / (n+ n-)", worst <= 1e-12, &format!("100 score sets, max difference {worst:.2e}"));
}

// ---------------------------------------------------------------------------
// 4. Planted valence effect recovered by selection; nothing selected under the null.

#[test]
fn c4_planted_effect_recovery() {
    let _guard = heavy();
    let runs = 100u64;
    let mut exact_hits = 0;
    let mut rs = Vec::new();
    for seed in 1..=runs {
        let corpus = SynthSpec { seed, ..SynthSpec::default() }.generate().unwrap();
        rs.push(corpus.ground_truth().unwrap().realized_r["valence"]);
        let sel = selected_names(&analyze_matrix(&corpus.train_matrix()).unwrap());
        if sel == ["valence"] {
            exact_hits += 1;
        }
    }
    let within = rs.iter().filter(|r| (**r - 0.66).abs() <= 0.1).count();
    let mean_r = rs.iter().sum::<f64>() / rs.len() as f64;

    let mut null_selected = 0;
    for seed in 1..=runs {
        let corpus = SynthSpec { seed, ..SynthSpec::null() }.generate().unwrap();
        null_selected += selected_names(&analyze_matrix(&corpus.train_matrix()).unwrap()).len();
    }
    let null_rate = null_selected as f64 / (3 * runs) as f64;
    let ok = exact_hits >= 95 && null_rate <= 0.10 && (mean_r - 0.66).abs() <= 0.1;
    verdict(
        4,
        "planted effect recovery",
        ok,
        &format!(
            "selected exactly {{valence}} in {exact_hits}/{runs}; realized r mean {mean_r:.3}, {within}/{runs} within 0.66 +/- 0.1; null selection rate {:.1}%",
            100.0 * null_rate
        ),
    );
}

// ---------------------------------------------------------------------------
// Pipeline helpers.

fn synth_config(dir: &Path, spec: &SynthSpec, task: TaskId, sets: &[FeatureSet], grid: GridKind) -> RunConfig {
    let manifest = spec.generate().unwrap().write(&dir.join("corpus")).unwrap();
    let mut cfg = RunConfig { task, grid, feature_sets: sets.to_vec(), ..RunConfig::default() };
    cfg.languages.insert(CORPUS_B.into(), Language::De);
    cfg.paths.manifest = manifest;
    cfg.paths.output_dir = dir.join("out");
    cfg.validate().unwrap();
    cfg
}

fn read_manifest(cfg: &RunConfig) -> RunManifest {
    let text = std::fs::read_to_string(task_dir(cfg).join(RUN_MANIFEST_FILE)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Report of the family with the best cross-validated UAR for `set`.
fn best_cv_report<'a>(cfg: &RunConfig, reports: &'a [EvalReport], set: FeatureSet, corpus: &str) -> &'a EvalReport {
    let manifest = read_manifest(cfg);
    let best = manifest
        .models
        .iter()
        .filter(|m| m.feature_set == set)
        .max_by(|a, b| a.cv_mean_uar.total_cmp(&b.cv_mean_uar))
        .unwrap();
    reports
        .iter()
        .find(|r| r.model_family == best.family.as_str() && r.feature_set == set.as_str() && r.test_corpus == corpus)
        .unwrap()
}

// ---------------------------------------------------------------------------
// 5. Task A on a separable synthetic corpus, full grids.

#[test]
fn c5_separable_task_a_end_to_end() {
    let _guard = heavy();
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path(), &SynthSpec::separable(), TaskId::A, &[FeatureSet::SerDims], GridKind::Full);
    let t0 = Instant::now();
    let reports = run_task(&cfg).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let best = best_cv_report(&cfg, &reports, FeatureSet::SerDims, CORPUS_A);

    let null_dir = tempfile::tempdir().unwrap();
    let null_cfg = synth_config(null_dir.path(), &SynthSpec::null(), TaskId::A, &[FeatureSet::SerDims], GridKind::Full);
    let null_reports = run_task(&null_cfg).unwrap();
    let null_best = best_cv_report(&null_cfg, &null_reports, FeatureSet::SerDims, CORPUS_A);

    let ok = best.uar_pct >= 90.0
        && elapsed < 300.0
        && null_best.ci_low <= 50.0
        && 50.0 <= null_best.ci_high
        && best.n_bootstrap == 1000;
    verdict(
        5,
        "separable Task A",
        ok,
        &format!(
            "best {} UAR {:.1} in {elapsed:.0} s; null {} UAR {:.1} CI [{:.1}, {:.1}]",
            best.model_family, best.uar_pct, null_best.model_family, null_best.uar_pct, null_best.ci_low, null_best.ci_high
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Cross-corpus drop with and without per-corpus robust scaling.

#[test]
fn c6_robust_scaling_limits_cross_corpus_drop() {
    let _guard = heavy();
    let spec = SynthSpec { b_location: -6.0, b_scale: 1.5, ..SynthSpec::separable() };
    let mut drops: BTreeMap<&str, [f64; 2]> = BTreeMap::new();
    for (k, scaling) in [true, false].into_iter().enumerate() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synth_config(dir.path(), &spec, TaskId::B, &[FeatureSet::SerDims], GridKind::Quick);
        cfg.robust_scaling = scaling;
        let reports = run_task(&cfg).unwrap();
        for fam in ModelFamily::ALL {
            let uar_on = |corpus: &str| {
                reports
                    .iter()
                    .find(|r| r.model_family == fam.as_str() && r.test_corpus == corpus)
                    .unwrap()
                    .uar_pct
            };
            drops.entry(fam.as_str()).or_default()[k] = uar_on(CORPUS_A) - uar_on(CORPUS_B);
        }
    }
    let ok = drops.values().all(|[with, without]| *with <= 15.0 && without > with);
    let detail: Vec<String> = drops
        .iter()
        .map(|(f, [w, wo])| format!("{f}: drop {w:.1} scaled, {wo:.1} unscaled"))
        .collect();
    verdict(6, "per-corpus scaling keeps the cross-corpus drop small", ok, &detail.join("; "));
}

// ---------------------------------------------------------------------------
// 7. DSP oracles.

const SR: f64 = 16_000.0;

fn gaussian_pulses(periods_ms: &[f64]) -> AudioBuffer {
    let total: f64 = periods_ms.iter().sum::<f64>() + 20.0;
    let n = (total / 1000.0 * SR) as usize;
    let mut x = vec![0.0; n];
    let sigma = 0.0005 * SR;
    let mut t = 0.005 * SR;
    for p in periods_ms {
        let lo = (t - 6.0 * sigma).max(0.0) as usize;
        let hi = ((t + 6.0 * sigma) as usize).min(n - 1);
        for (i, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = (i as f64 - t) / sigma;
            *v += 0.5 * (-0.5 * d * d).exp();
        }
        t += p / 1000.0 * SR;
    }
    AudioBuffer::new(x, SR as u32).unwrap()
}

fn fft_peak_hz(buf: &AudioBuffer) -> f64 {
    let x = buf.samples();
    let n = x.len();
    let mut spec: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let mag: Vec<f64> = spec[..n / 2].iter().map(|c| c.norm()).collect();
    let k = (1..mag.len() - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    // Parabolic interpolation on log magnitude.
    let (l, c, r) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
    let delta = 0.5 * (l - r) / (l - 2.0 * c + r);
    (k as f64 + delta) * buf.sample_rate() as f64 / n as f64
}

#[test]
fn c7_dsp_oracles() {
    let alternating: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 10.0 } else { 10.2 }).collect();
    let b = gaussian_pulses(&alternating);
    let jitter_alt = 100.0 * perturbation(&b, &analyze_pitch(&b)).jitter_local.unwrap();

    let b = gaussian_pulses(&[10.0; 100]);
    let jitter_const = 100.0 * perturbation(&b, &analyze_pitch(&b)).jitter_local.unwrap();

    let sine: Vec<f64> = (0..SR as usize).map(|i| 0.5 * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / SR).sin()).collect();
    let mut f0 = analyze_pitch(&AudioBuffer::new(sine, SR as u32).unwrap()).f0.valid_values();
    f0.sort_by(f64::total_cmp);
    let median_f0 = f0[f0.len() / 2];

    let src_rate = 44_100.0;
    let tone: Vec<f64> = (0..src_rate as usize)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / src_rate).sin())
        .collect();
    let down = resample(&AudioBuffer::new(tone, src_rate as u32).unwrap(), 16_000);
    let peak = fft_peak_hz(&down);

    let ok = (jitter_alt - 1.98).abs() <= 0.1
        && jitter_const < 0.1
        && (median_f0 - 200.0).abs() <= 2.0
        && (peak - 440.0).abs() <= 1.0
        && down.sample_rate() == 16_000;
    verdict(
        7,
        "DSP oracles",
        ok,
        &format!(
            "alternating jitter {jitter_alt:.3}% (1.98 expected), constant {jitter_const:.4}%, 200 Hz sine median F0 {median_f0:.2} Hz, resampled 440 Hz peak {peak:.2} Hz"
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Determinism of repeated runs.

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn c8_repeated_runs_are_byte_identical() {
    let _guard = heavy();
    let spec = SynthSpec {
        n_train: 40,
        n_train_depressed: 12,
        n_test_a: 14,
        n_test_a_depressed: 5,
        n_b: 14,
        n_b_depressed: 4,
        segments_per_speaker: 3,
        audio: Some(AudioSpec::default()),
        text: Some(TextSpec::default()),
        embedding_shift: Some(1.0),
        ..SynthSpec::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path(), &spec, TaskId::B, &FeatureSet::ALL, GridKind::Quick);
    let mut second = cfg.clone();
    second.paths.output_dir = dir.path().join("again");

    let first_reports = run_task(&cfg).unwrap();
    run_task(&second).unwrap();
    let (a, b) = (files_under(&task_dir(&cfg)), files_under(&task_dir(&second)));
    let differing: Vec<&PathBuf> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    let ok = !a.is_empty() && a.len() == b.len() && differing.is_empty() && first_reports.iter().all(|r| r.n_bootstrap == 1000);
    verdict(
        8,
        "repeated runs are byte-identical",
        ok,
        &format!("{} files compared, {} reports, differing {differing:?}", a.len(), first_reports.len()),
    );
}

// ---------------------------------------------------------------------------
// 9. Cross-validation folds never share speakers.

#[test]
fn c9_folds_are_speaker_disjoint() {
    let train: FeatureMatrix = SynthSpec::default().generate().unwrap().train_matrix();
    let mut leaks = 0;
    let mut checked = 0;
    for seed in 0..20 {
        let plan = CvPlan::new(&train, 5, seed).unwrap();
        for fold in plan.folds(&train).unwrap() {
            let tr: std::collections::BTreeSet<&str> = fold.train.iter().map(|&i| train.speakers[i].as_str()).collect();
            leaks += fold.validation.iter().filter(|&&i| tr.contains(train.speakers[i].as_str())).count();
            checked += 1;
        }
        plan.audit(&train).unwrap();
    }
    // A fold that moves one validation row of a speaker into training must be rejected.
    let plan = CvPlan::new(&train, 5, 0).unwrap();
    let mut fold: Fold = plan.folds(&train).unwrap().remove(0);
    let moved = fold.validation.pop().unwrap();
    fold.train.push(moved);
    let leak_caught = audit_fold(&train, &fold).is_err();

    let ok = leaks == 0 && leak_caught;
    verdict(
        9,
        "speaker-disjoint folds",
        ok,
        &format!("{checked} folds over 20 seeds, {leaks} shared rows; planted leak rejected: {leak_caught}"),
    );
}

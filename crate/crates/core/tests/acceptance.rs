//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use grc_core::consensus::{
    bounded_normalized_distance, edit_distance, summarize_evidence, summarize_texts, EvidenceEntry, EvidenceRecord,
};
use grc_core::controller::{decide, default_family, operating_point_for, validate_family, Ablation, Outcome, Reason};
use grc_core::evaluation::metrics::meltdown_rate;
use grc_core::evaluation::{
    calibrate_confidence_threshold, cer, evaluate, evaluate_confidence_baseline, split_heldout, sweep_operating_points,
    sweep_query_budget, EvalSettings, ReportRow,
};
use grc_core::gateway::{ConfidenceModel, Gateway, ScriptedGenerator};
use grc_core::harness::synth::generate_corpus;
use grc_core::harness::{cmd_sweep, Overrides, SweepMode, SynthCorpus, SynthSpec};
use grc_core::image::{Channels, CropImage};
use grc_core::screening::{canonicalize, screen, screen_against, LengthBoundParams};
use grc_core::{OperatingPoint, ProtocolConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Shared fixtures

/// The 500-sample corpus used by the suppression, ablation, and baseline criteria.
fn main_corpus_spec() -> SynthSpec {
    SynthSpec {
        n: 500,
        seed: 20,
        p_overgen: 0.05,
        p_substitute: 0.10,
        p_unstable: 0.15,
        confidence_model: ConfidenceModel::Overconfident,
        ..SynthSpec::default()
    }
}

fn settings(seed: u64) -> EvalSettings {
    EvalSettings {
        dataset_name: "synth".into(),
        protocol: ProtocolConfig { seed, ..ProtocolConfig::default() },
        parallelism: 4,
        ..EvalSettings::default()
    }
}

fn gateway(c: &SynthCorpus, cache: bool) -> Gateway {
    Gateway::new(Arc::new(ScriptedGenerator::new(c.scripted.clone()).unwrap()), cache)
}

fn m3() -> OperatingPoint {
    operating_point_for(3, &default_family()).unwrap()
}

fn md(row: &ReportRow) -> f64 {
    row.meltdown().expect("defined meltdown")
}

// ---------------------------------------------------------------------------
// 1. Edit-distance oracle

/// Top-down memoized recursion straight from the definition.
fn ed_oracle(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut [[u8; 8]; 8]) -> u8 {
        if i == a.len() {
            return (b.len() - j) as u8;
        }
        if j == b.len() {
            return (a.len() - i) as u8;
        }
        if memo[i][j] != u8::MAX {
            return memo[i][j];
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo[i][j] = v;
        v
    }
    let mut memo = [[u8::MAX; 8]; 8];
    go(a, b, 0, 0, &mut memo) as usize
}

fn all_strings(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in ['a', 'b', 'c'] {
                next.push(format!("{s}{c}"));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn c1_edit_distance_oracle() -> Check {
    let started = Instant::now();
    let strings = all_strings(7);
    let mut pairs = 0u64;
    let mut mismatches = 0u64;
    for a in &strings {
        for b in &strings {
            pairs += 1;
            if edit_distance(a, b) != ed_oracle(a.as_bytes(), b.as_bytes()) {
                mismatches += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(mismatches == 0, || format!("{mismatches} mismatches in {pairs} pairs"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{pairs} pairs exhaustive, 0 mismatches, {:.1}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 2. Formula fidelity, hand-derived values

fn close(label: &str, got: f64, want: f64) -> Result<(), String> {
    ensure((got - want).abs() <= 1e-12, || format!("{label}: got {got}, want {want}"))
}

fn c2_formula_fidelity() -> Check {
    let d_cases: &[(&str, &str, f64)] = &[
        ("", "", 0.0),
        ("a", "", 1.0),
        ("", "abc", 1.0),
        ("cat", "car", 1.0 / 3.0),
        ("kitten", "sitting", 3.0 / 7.0),
        ("flaw", "lawn", 2.0 / 4.0),
        ("stop", "stopstopstop", 8.0 / 12.0),
        ("abc", "xyz", 1.0),
        ("abcd", "abdc", 2.0 / 4.0),
        ("été", "ete", 2.0 / 3.0),
        ("house", "hose", 1.0 / 5.0),
        ("ab", "ba", 1.0),
    ];
    for &(a, b, want) in d_cases {
        close(&format!("d({a:?},{b:?})"), bounded_normalized_distance(a, b), want)?;
    }

    // (texts, q, Δ); Δ is the mean bounded distance to the unique mode.
    let s_cases: &[(&[&str], f64, f64)] = &[
        (&["a"], 1.0, 0.0),
        (&["cat", "cat", "cat", "car"], 3.0 / 4.0, 1.0 / 12.0),
        (&["a", "a", "b"], 2.0 / 3.0, 1.0 / 3.0),
        (&["a", "a", "b", "c", "d"], 2.0 / 5.0, 3.0 / 5.0),
        (&["x", "x", "x", "x", "x"], 1.0, 0.0),
        (&["hotel", "hotel", "hotel", "hotels", "hotal"], 3.0 / 5.0, (1.0 / 6.0 + 1.0 / 5.0) / 5.0),
        (&["house", "house", "qwert", "zzzzz"], 2.0 / 4.0, 2.0 / 4.0),
        (&["stop", "stop", "stopstopstop"], 2.0 / 3.0, (2.0 / 3.0) / 3.0),
        (&["abcd", "abcd", "abdc"], 2.0 / 3.0, 0.5 / 3.0),
        (&["kitten", "kitten", "sitting"], 2.0 / 3.0, (3.0 / 7.0) / 3.0),
        (&["", "", "a"], 2.0 / 3.0, 1.0 / 3.0),
        (&["flaw", "flaw", "flaw", "lawn", "law"], 3.0 / 5.0, (0.5 + 0.25) / 5.0),
        (&["p", "q", "p", "q", "p", "q", "p"], 4.0 / 7.0, 3.0 / 7.0),
    ];
    for &(texts, q, delta) in s_cases {
        let s = summarize_texts(texts);
        close(&format!("q{texts:?}"), s.vote_fraction.ok_or("no q")?, q)?;
        close(&format!("Δ{texts:?}"), s.dispersion.ok_or("no Δ")?, delta)?;
    }
    // A tie has no unique mode, so q and Δ are undefined rather than numbers.
    let tie = summarize_texts(&["a", "b"]);
    ensure(tie.vote_fraction.is_none() && tie.dispersion.is_none(), || format!("tie: {tie:?}"))?;

    let cer_cases: &[(&str, &str, bool, f64)] = &[
        ("stopstopstop", "stop", true, 2.0),
        ("stop", "stop", true, 0.0),
        ("STOP", "stop", true, 0.0),
        ("STOP", "stop", false, 1.0),
        ("", "stop", true, 1.0),
        ("stp", "stop", true, 1.0 / 4.0),
        ("sitting", "kitten", true, 3.0 / 6.0),
        ("  hello   world ", "hello world", true, 0.0),
        ("hotels", "hotel", true, 1.0 / 5.0),
        ("stopstopstopstop", "stop", true, 3.0),
        ("x", "abc", true, 1.0),
        ("lawn", "flaw", true, 2.0 / 4.0),
    ];
    for &(p, g, ci, want) in cer_cases {
        close(&format!("cer({p:?},{g:?})"), cer(p, g, ci).map_err(|e| e.to_string())?, want)?;
    }

    let md_cases: &[(&[f64], f64, f64)] = &[
        (&[0.0, 2.0, 3.5, 1.999], 2.0, 2.0 / 4.0),
        (&[0.0, 0.0, 0.0], 2.0, 0.0),
        (&[2.0], 2.0, 1.0),
        (&[1.9999999], 2.0, 0.0),
        (&[0.5, 1.0, 1.5], 1.0, 2.0 / 3.0),
        (&[0.0, 0.0, 0.0, 0.0, 3.0], 2.0, 1.0 / 5.0),
        (&[0.1, 0.2], 0.0, 1.0),
        (&[3.0, 3.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2.0, 3.0 / 10.0),
        (&[2.0, 2.0, 1.0], 2.0, 2.0 / 3.0),
        (&[5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 0.0], 2.0, 7.0 / 8.0),
    ];
    for &(cers, delta, want) in md_cases {
        close(&format!("md{cers:?}@{delta}"), meltdown_rate(cers, delta).map_err(|e| e.to_string())?, want)?;
    }
    ensure(meltdown_rate(&[], 2.0).is_err(), || "meltdown over nothing must be undefined".into())?;

    Ok(format!(
        "d {} cases, q/Δ {} cases each, CER {} cases, Meltdown {} cases, all within 1e-12",
        d_cases.len(),
        s_cases.len(),
        cer_cases.len(),
        md_cases.len()
    ))
}

// ---------------------------------------------------------------------------
// 3. Decision triptych at K = 5, m = 3

fn record(views: &[(&str, bool)]) -> EvidenceRecord {
    // Invalid views are long outputs screened against a bound of 8.
    EvidenceRecord {
        entries: views
            .iter()
            .enumerate()
            .map(|(i, &(text, fits))| {
                let canonical = canonicalize(text, true);
                let verdict = screen_against(&canonical, Some(8));
                assert_eq!(verdict.valid, fits, "fixture {text:?}");
                EvidenceEntry {
                    view_index: i as u32 + 1,
                    canonical,
                    verdict,
                }
            })
            .collect(),
        absent_views: Vec::new(),
    }
}

fn c3_triptych() -> Check {
    let op = m3();
    let cases: [(&str, EvidenceRecord, Outcome, Reason); 4] = [
        (
            "fragmented, all distinct",
            record(&[("stop", true), ("step", true), ("stup", true), ("shop", true), ("slop", true)]),
            Outcome::Abstain,
            Reason::NoUniqueMode,
        ),
        (
            "fragmented, q = 2/5",
            record(&[("stop", true), ("stop", true), ("step", true), ("stup", true), ("shop", true)]),
            Outcome::Abstain,
            Reason::LowConsensus,
        ),
        (
            "majority but dispersed",
            record(&[
                ("house", true),
                ("house", true),
                ("qwert", true),
                ("housesmithhouse", false),
                ("zzzzz", true),
            ]),
            Outcome::Abstain,
            Reason::HighDispersion,
        ),
        (
            "borderline but tight",
            record(&[("hotel", true), ("hotels", true), ("hotel", true), ("hotal", true), ("hotel", true)]),
            Outcome::Accept,
            Reason::Accepted,
        ),
    ];
    let mut seen = Vec::new();
    for (name, rec, outcome, reason) in cases {
        let summary = summarize_evidence(&rec);
        let d = decide(&summary, &op);
        ensure(d.outcome == outcome && d.reason == reason, || {
            format!("{name}: got {:?}/{:?} from {summary:?}", d.outcome, d.reason)
        })?;
        seen.push(format!("{name} -> {:?} ({:?})", d.outcome, d.reason));
    }
    Ok(seen.join("; "))
}

// ---------------------------------------------------------------------------
// 4. Coverage monotonicity

fn c4_coverage_monotone() -> Check {
    let corpora = [
        SynthSpec { n: 300, seed: 1, ..SynthSpec::default() },
        SynthSpec { n: 300, seed: 2, p_overgen: 0.10, p_substitute: 0.05, p_unstable: 0.30, ..SynthSpec::default() },
        SynthSpec { n: 300, seed: 3, p_overgen: 0.02, p_substitute: 0.20, p_unstable: 0.05, ..SynthSpec::default() },
    ];
    let mut out = Vec::new();
    for spec in corpora {
        let c = SynthCorpus::generate(&spec);
        let s = settings(spec.seed);
        let gw = gateway(&c, true);
        let (_, base) = evaluate(&c.samples, &s, &gw, &m3(), Ablation::AlwaysAccept).unwrap();
        let rows = sweep_operating_points(&c.samples, &s, &gw, &default_family(), Ablation::Full).unwrap();
        let cov: Vec<f64> = rows.iter().map(|r| r.coverage_pct).collect();
        ensure(base.coverage_pct == 100.0, || format!("seed {}: AlwaysAccept coverage {}", spec.seed, base.coverage_pct))?;
        ensure(cov[0] >= cov[1] && cov[1] >= cov[2], || format!("seed {}: coverage {cov:?}", spec.seed))?;
        out.push(format!("seed {}: {:.1}/{:.1}/{:.1}%", spec.seed, cov[0], cov[1], cov[2]));
    }
    Ok(format!("m=1/3/5 coverage {}; AlwaysAccept 100.0%", out.join(", ")))
}

// ---------------------------------------------------------------------------
// 5-7. Risk suppression, ablations, confidence baseline on the main corpus

fn c5_suppression() -> Check {
    let started = Instant::now();
    let c = SynthCorpus::generate(&main_corpus_spec());
    let s = settings(main_corpus_spec().seed);
    let gw = gateway(&c, true);
    let (_, base) = evaluate(&c.samples, &s, &gw, &m3(), Ablation::AlwaysAccept).unwrap();
    let (_, full) = evaluate(&c.samples, &s, &gw, &m3(), Ablation::Full).unwrap();
    let elapsed = started.elapsed();
    ensure(md(&full) <= 0.2 * md(&base), || format!("meltdown {} vs baseline {}", md(&full), md(&base)))?;
    ensure(full.coverage() >= 0.8, || format!("coverage {}", full.coverage()))?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "Full m=3 MD@2 {:.1}‰ vs AlwaysAccept {:.1}‰ (limit {:.1}‰), coverage {:.1}%, {:.1}s",
        full.meltdown_permille.unwrap(),
        base.meltdown_permille.unwrap(),
        0.2 * base.meltdown_permille.unwrap(),
        full.coverage_pct,
        elapsed.as_secs_f64()
    ))
}

fn c6_ablation_order() -> Check {
    let c = SynthCorpus::generate(&main_corpus_spec());
    let s = settings(main_corpus_spec().seed);
    let gw = gateway(&c, true);
    let rows: Vec<ReportRow> = Ablation::ALL
        .iter()
        .map(|&a| evaluate(&c.samples, &s, &gw, &m3(), a).unwrap().1)
        .collect();
    let [full, no_struct, no_cons, always] = [md(&rows[0]), md(&rows[1]), md(&rows[2]), md(&rows[3])];
    let partial = no_struct.min(no_cons);
    ensure(full <= partial && partial <= always, || {
        format!("full {full}, no_structural {no_struct}, no_consensus {no_cons}, always {always}")
    })?;
    Ok(rows
        .iter()
        .map(|r| format!("{} {:.1}‰ @ {:.1}%", r.method, r.meltdown_permille.unwrap(), r.coverage_pct))
        .collect::<Vec<_>>()
        .join(", "))
}

fn c7_confidence_gap() -> Check {
    let spec = main_corpus_spec();
    let c = SynthCorpus::generate(&spec);
    let s = settings(spec.seed);
    let gw = gateway(&c, true);
    let (records, full) = evaluate(&c.samples, &s, &gw, &m3(), Ablation::Full).unwrap();
    // Coverage-matched on the corpus itself: the threshold is the
    // confidence quantile that keeps GRC's coverage.
    let t = calibrate_confidence_threshold(&records, full.coverage()).unwrap();
    let (_, conf) = evaluate_confidence_baseline(&c.samples, &s, &gw, t).unwrap();
    let gap = (conf.coverage() - full.coverage()).abs();
    ensure(gap <= 0.03, || format!("coverage {} vs {}", conf.coverage_pct, full.coverage_pct))?;
    ensure(md(&conf) > md(&full), || format!("conf_thr {} not above GRC {}", md(&conf), md(&full)))?;

    // The CLI's held-out protocol, reported for reference.
    let (heldout, test) = split_heldout(&c.samples, 0.2);
    let (h_records, h_row) = evaluate(&heldout, &s, &gw, &m3(), Ablation::Full).unwrap();
    let h_t = calibrate_confidence_threshold(&h_records, h_row.coverage()).unwrap();
    let (_, t_full) = evaluate(&test, &s, &gw, &m3(), Ablation::Full).unwrap();
    let (_, t_conf) = evaluate_confidence_baseline(&test, &s, &gw, h_t).unwrap();
    ensure(md(&t_conf) > md(&t_full), || "held-out split: baseline meltdown not above GRC".into())?;

    Ok(format!(
        "matched: conf_thr {:.1}‰ @ {:.1}% vs GRC {:.1}‰ @ {:.1}%; held-out split (n={}): conf_thr {:.1}‰ @ {:.1}% vs GRC {:.1}‰ @ {:.1}%",
        conf.meltdown_permille.unwrap(),
        conf.coverage_pct,
        full.meltdown_permille.unwrap(),
        full.coverage_pct,
        heldout.len(),
        t_conf.meltdown_permille.unwrap(),
        t_conf.coverage_pct,
        t_full.meltdown_permille.unwrap(),
        t_full.coverage_pct,
    ))
}

// ---------------------------------------------------------------------------
// 8. Query-budget accounting

fn c8_budget() -> Check {
    let spec = SynthSpec { n: 200, seed: 8, ..SynthSpec::default() };
    let c = SynthCorpus::generate(&spec);
    let n = c.samples.len() as u64;
    let s = settings(spec.seed);
    let rows = sweep_query_budget(&c.samples, &s, &gateway(&c, false), &m3(), &[3, 5, 7], false).unwrap();
    ensure(rows[0].backend_calls == n, || format!("baseline calls {}", rows[0].backend_calls))?;
    for (row, k) in rows[1..].iter().zip([3u64, 5, 7]) {
        ensure(row.backend_calls == k * n, || format!("K={k}: {} calls", row.backend_calls))?;
        ensure(row.relative_cost == Some(k as f64), || format!("K={k}: ratio {:?}", row.relative_cost))?;
    }

    let gw = gateway(&c, true);
    evaluate(&c.samples, &s, &gw, &m3(), Ablation::AlwaysAccept).unwrap();
    sweep_operating_points(&c.samples, &s, &gw, &default_family(), Ablation::Full).unwrap();
    let k = s.protocol.k_views as u64;
    ensure(gw.backend_calls() <= k * n, || format!("cached m-sweep used {} calls", gw.backend_calls()))?;
    Ok(format!(
        "uncached ratios {:?}; cached AlwaysAccept + m-sweep {} calls for {n} samples (limit {})",
        rows.iter().map(|r| r.relative_cost.unwrap()).collect::<Vec<_>>(),
        gw.backend_calls(),
        k * n
    ))
}

// ---------------------------------------------------------------------------
// 9. Determinism of cmd_sweep

fn c9_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { n: 120, seed: 9, ..SynthSpec::default() };
    generate_corpus(&spec, dir.path()).unwrap();
    let config = dir.path().join("config.toml");
    let manifest = dir.path().join("manifest.jsonl");
    let sweep = |out: &str, parallelism: usize, mode: &SweepMode| {
        let o = Overrides {
            out: Some(dir.path().join(out)),
            parallelism: Some(parallelism),
            ..Overrides::default()
        };
        cmd_sweep(&config, &manifest, mode, None, &o).unwrap();
    };
    let same = |a: &str, b: &str, f: &str| -> Result<(), String> {
        let read = |d: &str| std::fs::read(Path::new(dir.path()).join(d).join(f)).unwrap();
        ensure(read(a) == read(b), || format!("{f} differs between {a} and {b}"))
    };
    for (tag, mode) in [("m", SweepMode::M), ("k", SweepMode::K(vec![3, 5, 7]))] {
        let (a, b) = (format!("{tag}1"), format!("{tag}2"));
        sweep(&a, 1, &mode);
        sweep(&b, 4, &mode);
        same(&a, &b, "report.json")?;
        same(&a, &b, "trajectory.csv")?;
    }
    Ok("sweep_m and sweep_k reruns (parallelism 1 vs 4) byte-identical in report.json and trajectory.csv".into())
}

// ---------------------------------------------------------------------------
// 10. Property suites

const CASES: u32 = 1000;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn messy_text() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<String>(),
        "[ \t\r\n\u{0}\u{7}\u{85}\u{a0}\u{3000}aAbBzZéÉß!.]{0,24}",
    ]
}

fn dark_box_crop() -> impl Strategy<Value = CropImage> {
    (8u32..64, 8u32..64)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), 0..w, 0..h, 1..=w, 1..=h))
        .prop_map(|(w, h, x0, y0, bw, bh)| {
            let mut px = vec![225u8; (w * h) as usize];
            for y in y0..(y0 + bh).min(h) {
                for x in x0..(x0 + bw).min(w) {
                    px[(y * w + x) as usize] = 25;
                }
            }
            CropImage::new(px, w, h, Channels::Gray, "p").unwrap()
        })
}

fn small_words() -> impl Strategy<Value = String> {
    "[ab]{0,3}"
}

fn c10_properties() -> Check {
    let mut r = runner();
    r.run(&(messy_text(), any::<bool>()), |(s, ci)| {
        let once = canonicalize(&s, ci);
        prop_assert_eq!(canonicalize(&once.text, ci), once);
        Ok(())
    })
    .map_err(|e| format!("canonicalize idempotence: {e}"))?;

    let mut r = runner();
    r.run(&(dark_box_crop(), 1.0f64..4.0, 0.0f64..4.0, 0usize..80), |(img, alpha, extra, len)| {
        let t = canonicalize(&"x".repeat(len), true);
        let lo = LengthBoundParams { alpha, ..LengthBoundParams::default() };
        let hi = LengthBoundParams { alpha: alpha + extra, ..LengthBoundParams::default() };
        if screen(&t, &img, &lo).valid {
            prop_assert!(screen(&t, &img, &hi).valid);
        }
        Ok(())
    })
    .map_err(|e| format!("screen alpha-monotonicity: {e}"))?;

    let family = (prop::collection::vec(0.0f64..=1.0, 3), 0.0f64..=1.0, 1u32..=5).prop_map(|(mut taus, kappa, k_min)| {
        taus.sort_by(f64::total_cmp);
        vec![
            OperatingPoint::new(1, taus[0], kappa, k_min),
            OperatingPoint::new(3, taus[1], kappa, k_min),
            OperatingPoint::new(5, taus[2], kappa, k_min),
        ]
    });
    let mut r = runner();
    r.run(&(prop::collection::vec(small_words(), 0..7), family), |(texts, fam)| {
        prop_assert!(validate_family(&fam, 5).is_ok());
        let summary = summarize_texts(&texts);
        let accepts: Vec<bool> = fam.iter().map(|op| decide(&summary, op).is_accept()).collect();
        for i in 0..accepts.len() {
            for j in i + 1..accepts.len() {
                prop_assert!(!accepts[j] || accepts[i], "accepts at m={} but not m={}", fam[j].m, fam[i].m);
            }
        }
        Ok(())
    })
    .map_err(|e| format!("decide nestedness: {e}"))?;

    let entries = prop::collection::vec((small_words(), any::<bool>()), 0..8);
    let shuffled = entries.prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()));
    let mut r = runner();
    r.run(&shuffled, |(original, permuted)| {
        let build = |v: &[(String, bool)]| EvidenceRecord {
            entries: v
                .iter()
                .enumerate()
                .map(|(i, (t, valid))| {
                    let canonical = canonicalize(t, true);
                    let bound = if *valid { None } else { Some(0) };
                    let mut verdict = screen_against(&canonical, bound);
                    verdict.valid = *valid;
                    EvidenceEntry {
                        view_index: i as u32 + 1,
                        canonical,
                        verdict,
                    }
                })
                .collect(),
            absent_views: Vec::new(),
        };
        prop_assert_eq!(summarize_evidence(&build(&original)), summarize_evidence(&build(&permuted)));
        Ok(())
    })
    .map_err(|e| format!("summarize_evidence permutation invariance: {e}"))?;

    Ok(format!(
        "canonicalize idempotence, screen alpha-monotonicity, decide nestedness, permutation invariance: {CASES} cases each"
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 10] = [
        ("edit-distance oracle equivalence", c1_edit_distance_oracle),
        ("formula fidelity", c2_formula_fidelity),
        ("decision triptych", c3_triptych),
        ("coverage monotonicity", c4_coverage_monotone),
        ("catastrophic-risk suppression", c5_suppression),
        ("ablation ordering", c6_ablation_order),
        ("confidence-baseline gap", c7_confidence_gap),
        ("query-budget accounting", c8_budget),
        ("sweep determinism", c9_determinism),
        ("property suites", c10_properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("[PASS] {:>2}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any fails. Built with `harness = false` so the lines are
//! always visible under `cargo test`.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lmfuse::beam::{beam_search, BeamConfig};
use lmfuse::fusion::{fuse_step, FusionConfig};
use lmfuse::manifest::{read_manifest, to_jsonl, write_manifest};
use lmfuse::metrics::{perplexity, spearman, wer};
use lmfuse::penalty::{apply_cycle_penalty, apply_truncation_penalty, detect_max_cycle, CycleReport};
use lmfuse::scorer::{train_ngram, AcousticScenario, NGramLm, ScenarioEntry, Scorer, UniformScorer};
use lmfuse::selection::SampleRecord;
use lmfuse::suite::{self, run_suite, SuiteReport};
use lmfuse::{LogProbVector, TokenId, TokenMode, Vocabulary};

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

const SEED: u64 = 0;

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fusion_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let no_gate = FusionConfig::new(0.3, false).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(3..24);
        let pa = random_probs(&mut rng, n);
        let pl = random_probs(&mut rng, n);
        let lambda = rng.gen_range(0.0..3.0);
        let cfg = FusionConfig {
            lambda_gpt: lambda,
            ..no_gate
        };
        let a = LogProbVector::from_probs(&pa).unwrap();
        let l = LogProbVector::from_probs(&pl).unwrap();
        let fused = fuse_step(&a, &l, &cfg, 1).unwrap();
        // weighted geometric mean of the two distributions, in probability space
        let w = 1.0 / (1.0 + lambda);
        let expected: Vec<f64> = pa
            .iter()
            .zip(&pl)
            .map(|(x, y)| (x.powf(w) * y.powf(lambda * w)).ln())
            .collect();
        worst = worst.max(max_abs_diff(fused.values(), &expected));

        let identity = fuse_step(&a, &l, &FusionConfig { lambda_gpt: 0.0, ..cfg }, 1).unwrap();
        ensure!(identity == a, "lambda = 0 changed the acoustic vector");
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e} > 1e-9");
    Ok(format!("max deviation {worst:.2e} over 10000 steps"))
}

fn eot_gate() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let eot: TokenId = 1;
    let mut fired = 0;
    for _ in 0..2000 {
        let n = rng.gen_range(3..16);
        let mut pa = random_probs(&mut rng, n);
        let top = pa.iter().copied().fold(0.0, f64::max);
        let (i, _) = pa.iter().enumerate().find(|(_, &p)| p == top).unwrap();
        pa.swap(i, eot as usize);
        if rng.gen_bool(0.2) {
            // tie for the top spot
            let other = (eot as usize + 1) % n;
            pa[other] = pa[eot as usize];
            let s: f64 = pa.iter().sum();
            pa.iter_mut().for_each(|x| *x /= s);
        }
        let a = LogProbVector::from_probs(&pa).unwrap();
        let l = LogProbVector::from_probs(&random_probs(&mut rng, n)).unwrap();
        let cfg = FusionConfig::new(rng.gen_range(0.01..3.0), true).unwrap();
        let fused = fuse_step(&a, &l, &cfg, eot).unwrap();
        ensure!(
            fused
                .values()
                .iter()
                .zip(a.values())
                .all(|(x, y)| x.to_bits() == y.to_bits()),
            "gated step differs from the acoustic vector"
        );
        fired += 1;
    }
    let a = LogProbVector::from_probs(&[0.0, 0.6, 0.4]).unwrap();
    let l = LogProbVector::from_probs(&[0.0, 0.01, 0.99]).unwrap();
    let off = fuse_step(&a, &l, &FusionConfig::new(0.3, false).unwrap(), 1).unwrap();
    ensure!(off != a, "gate disabled but the step was left unfused");
    Ok(format!("{fired} gated steps bit-exact; ungated counterexample differs"))
}

/// O(n³): try every (period, start) and count how many copies follow.
fn brute_force_cycle(tokens: &[TokenId]) -> CycleReport {
    let n = tokens.len();
    let mut best = CycleReport::default();
    for period in 1..=n / 2 {
        for start in 0..n {
            let mut repeats = 0;
            while start + (repeats + 2) * period <= n
                && (0..period).all(|i| tokens[start + i] == tokens[start + (repeats + 1) * period + i])
            {
                repeats += 1;
            }
            if repeats == 0 {
                continue;
            }
            let better = (period, repeats) > (best.period, best.repeats)
                || ((period, repeats) == (best.period, best.repeats) && start < best.start);
            if better || best.period == 0 {
                best = CycleReport { period, repeats, start };
            }
        }
    }
    best
}

fn cycle_oracle() -> Check {
    let pinned: [(&str, (usize, usize, usize)); 3] =
        [("ABCDABCD", (4, 1, 0)), ("ABABAB", (2, 2, 0)), ("XXXX", (2, 1, 0))];
    for (text, (l, c, s)) in pinned {
        let toks: Vec<TokenId> = text.bytes().map(TokenId::from).collect();
        let got = detect_max_cycle(&toks);
        ensure!(
            (got.period, got.repeats, got.start) == (l, c, s),
            "{text}: got ({}, {}, {})",
            got.period,
            got.repeats,
            got.start
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for case in 0..1000 {
        let alphabet = rng.gen_range(2..=5);
        let n = rng.gen_range(0..=50);
        let toks: Vec<TokenId> = (0..n).map(|_| rng.gen_range(0..alphabet)).collect();
        let (got, want) = (detect_max_cycle(&toks), brute_force_cycle(&toks));
        ensure!(got == want, "case {case} {toks:?}: got {got:?}, oracle {want:?}");
    }
    Ok("3 pinned + 1000 random sequences match".into())
}

fn penalty_arithmetic() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let slp = -rng.gen_range(0.0..200.0);
        let n = rng.gen_range(1..100usize);
        let period = rng.gen_range(1..20usize);
        let repeats = rng.gen_range(1..10usize);
        let cycle = CycleReport {
            period,
            repeats,
            start: 0,
        };
        let t = apply_truncation_penalty(slp, n, true);
        let c = apply_cycle_penalty(slp, &cycle);
        worst = worst.max((t - (slp - n as f64 * LN_2)).abs());
        worst = worst.max((c - (slp - (period * repeats) as f64 * LN_2)).abs());
        ensure!(
            apply_truncation_penalty(slp, n, false) == slp,
            "untruncated decode penalized"
        );
        let tc = apply_cycle_penalty(apply_truncation_penalty(slp, n, true), &cycle);
        let ct = apply_truncation_penalty(apply_cycle_penalty(slp, &cycle), n, true);
        worst = worst.max((tc - ct).abs());
    }
    ensure!(worst <= 1e-12, "max deviation {worst:e} > 1e-12");
    Ok(format!("max deviation {worst:.2e}; order-independent"))
}

/// Random table-driven scorer with an explicit row for every prefix.
struct Table {
    rows: HashMap<Vec<TokenId>, Vec<f64>>,
}

impl Table {
    fn random(rng: &mut ChaCha8Rng, size: usize, content: &[TokenId], depth: usize, eot: TokenId) -> Self {
        let mut rows = HashMap::new();
        let mut frontier = vec![Vec::new()];
        for _ in 0..=depth {
            let mut next = Vec::new();
            for prefix in frontier {
                let mut row = random_probs(rng, size);
                if rng.gen_bool(0.2) {
                    // make EOT the acoustic argmax so the gate has work to do
                    let top = row.iter().copied().fold(0.0, f64::max);
                    row[eot as usize] += top;
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|x| *x /= s);
                }
                for &c in content {
                    let mut p: Vec<TokenId> = prefix.clone();
                    p.push(c);
                    next.push(p);
                }
                rows.insert(prefix, row);
            }
            frontier = next;
        }
        Self { rows }
    }

    fn scenario(&self, size: usize) -> AcousticScenario {
        let entries = self
            .rows
            .iter()
            .map(|(p, r)| ScenarioEntry {
                prefix: p.clone(),
                probs: r.clone(),
            })
            .collect();
        AcousticScenario::new("oracle", "v", entries, vec![1.0 / size as f64; size]).unwrap()
    }

    fn logp(&self, prefix: &[TokenId], token: TokenId) -> f64 {
        self.rows[prefix][token as usize].ln()
    }
}

struct Scored {
    tokens: Vec<TokenId>,
    alp: f64,
    penalized: f64,
}

fn oracle_best(
    acoustic: &Table,
    lm: &dyn Fn(&[TokenId], TokenId) -> f64,
    content: &[TokenId],
    eot: TokenId,
    cfg: &BeamConfig,
) -> Scored {
    let lambda = cfg.fusion.lambda_gpt;
    let fused = |prefix: &[TokenId], token: TokenId| {
        let row = &acoustic.rows[prefix];
        let top = row.iter().copied().fold(0.0, f64::max);
        let gated = cfg.fusion.eot_gate_enabled && row[eot as usize] == top;
        let a = acoustic.logp(prefix, token);
        if lambda == 0.0 || gated {
            a
        } else {
            (a + lambda * lm(prefix, token)) / (1.0 + lambda)
        }
    };
    let mut all = Vec::new();
    let mut frontier: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    for depth in 0..=cfg.max_tokens {
        let mut next = Vec::new();
        for (prefix, slp) in &frontier {
            if depth == cfg.max_tokens {
                all.push((prefix.clone(), *slp, true));
                continue;
            }
            let mut done = prefix.clone();
            done.push(eot);
            all.push((done, slp + fused(prefix, eot), false));
            for &c in content {
                let mut p = prefix.clone();
                p.push(c);
                next.push((p, slp + fused(prefix, c)));
            }
        }
        frontier = next;
    }
    let mut best: Option<Scored> = None;
    for (tokens, slp, truncated) in all {
        let n = tokens.len();
        let body = if truncated { &tokens[..] } else { &tokens[..n - 1] };
        let mut pen = slp;
        if cfg.truncation_penalty_enabled && truncated {
            pen -= n as f64 * LN_2;
        }
        if cfg.hallucination_penalty_enabled {
            let c = brute_force_cycle(body);
            pen -= (c.period * c.repeats) as f64 * LN_2;
        }
        let cand = Scored {
            alp: pen / n as f64,
            penalized: pen,
            tokens,
        };
        let wins = match &best {
            None => true,
            Some(b) => {
                cand.alp > b.alp
                    || (cand.alp == b.alp
                        && (cand.penalized > b.penalized
                            || (cand.penalized == b.penalized
                                && (cand.tokens.len(), &cand.tokens) < (b.tokens.len(), &b.tokens))))
            }
        };
        if wins {
            best = Some(cand);
        }
    }
    best.unwrap()
}

fn beam_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut max_total = 0;
    for case in 0..200 {
        let n_content = rng.gen_range(1..=3usize);
        let names: Vec<String> = (0..n_content).map(|i| format!("t{i}")).collect();
        let vocab = Vocabulary::with_specials(names, TokenMode::Word).unwrap();
        let size = vocab.len();
        let eot = vocab.eot_id();
        let content: Vec<TokenId> = vocab.content_ids().collect();
        let max_tokens = rng.gen_range(1..=5usize);
        let total: usize = (0..=max_tokens).map(|t| n_content.pow(t as u32)).sum();
        max_total = max_total.max(total);
        let cfg = BeamConfig {
            beam_size: total,
            max_tokens,
            fusion: FusionConfig::new([0.0, 0.1, 0.3, 1.0][rng.gen_range(0..4)], rng.gen_bool(0.5)).unwrap(),
            hallucination_penalty_enabled: rng.gen_bool(0.5),
            truncation_penalty_enabled: rng.gen_bool(0.5),
        };
        let acoustic = Table::random(&mut rng, size, &content, max_tokens, eot);
        let scenario = acoustic.scenario(size);

        let (out, want) = if rng.gen_bool(0.5) {
            let lm_table = Table::random(&mut rng, size, &content, max_tokens, eot);
            let lm_scenario = lm_table.scenario(size);
            let out = beam_search(&scenario, &lm_scenario, &vocab, &cfg);
            let lm = |p: &[TokenId], t: TokenId| lm_table.logp(p, t);
            (out, oracle_best(&acoustic, &lm, &content, eot, &cfg))
        } else {
            let out = beam_search(&scenario, &UniformScorer::new(size), &vocab, &cfg);
            let lm = |_: &[TokenId], _: TokenId| -(size as f64).ln();
            (out, oracle_best(&acoustic, &lm, &content, eot, &cfg))
        };
        let out = out.map_err(|e| format!("case {case}: {e}"))?;
        ensure!(
            out.best.tokens == want.tokens && out.alp.to_bits() == want.alp.to_bits(),
            "case {case}: beam {:?} alp {} vs oracle {:?} alp {}",
            out.best.tokens,
            out.alp,
            want.tokens,
            want.alp
        );
    }
    Ok(format!(
        "200 scenarios agree exactly (up to {max_total} sequences each)"
    ))
}

/// Plain Levenshtein distance over words.
fn edit_distance(r: &[&str], h: &[&str]) -> usize {
    let mut d: Vec<Vec<usize>> = vec![vec![0; h.len() + 1]; r.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=r.len() {
        for j in 1..=h.len() {
            let sub = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[r.len()][h.len()]
}

fn wer_oracle() -> Check {
    let pinned = [
        ("a b c", "a b c", (0, 0, 0), 0.0),
        ("a b c", "a x c", (1, 0, 0), 1.0 / 3.0),
        ("a b c", "", (0, 3, 0), 1.0),
        ("a", "a a a", (0, 0, 2), 2.0),
    ];
    for (r, h, (s, d, i), w) in pinned {
        let got = wer(r, h).unwrap();
        ensure!(
            (got.substitutions, got.deletions, got.insertions) == (s, d, i) && got.wer == w,
            "({r:?}, {h:?}): got {got:?}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let words = ["a", "b", "c", "d"];
    for case in 0..500 {
        let alphabet = rng.gen_range(1..=4);
        let r: Vec<&str> = (0..rng.gen_range(1..=10))
            .map(|_| words[rng.gen_range(0..alphabet)])
            .collect();
        let h: Vec<&str> = (0..rng.gen_range(0..=10))
            .map(|_| words[rng.gen_range(0..alphabet)])
            .collect();
        let got = wer(&r.join(" "), &h.join("  ")).unwrap();
        let dist = edit_distance(&r, &h);
        ensure!(
            got.errors() == dist
                && got.ref_words == r.len()
                && got.wer == dist as f64 / r.len() as f64
                && got.substitutions + got.deletions <= r.len()
                && r.len() - got.deletions + got.insertions == h.len(),
            "case {case} {r:?} / {h:?}: got {got:?}, distance {dist}"
        );
    }
    Ok("4 pinned + 500 random pairs match the DP oracle".into())
}

fn perplexity_identity() -> Check {
    let vocab = Vocabulary::with_specials(["a", "b", "c"], TokenMode::Word).unwrap();
    let a = vocab.id("a").unwrap();
    let b = vocab.id("b").unwrap();
    let lm = train_ngram(&[vec![a, a, a, b]], &vocab, 1, 1e-12, false).unwrap();
    let h: f64 = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
    let ppl = lm.perplexity(&[vec![a, a, a, b]]).unwrap();
    ensure!((ppl - h.exp()).abs() <= 1e-6, "aaab: {ppl} vs {}", h.exp());

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let content: Vec<TokenId> = vocab.content_ids().collect();
    for case in 0..50 {
        let corpus: Vec<Vec<TokenId>> = (0..rng.gen_range(1..6))
            .map(|_| {
                (0..rng.gen_range(1..12))
                    .map(|_| content[rng.gen_range(0..3)])
                    .collect()
            })
            .collect();
        let mut counts = HashMap::new();
        let total: usize = corpus.iter().map(Vec::len).sum();
        for &t in corpus.iter().flatten() {
            *counts.entry(t).or_insert(0usize) += 1;
        }
        let entropy: f64 = counts
            .values()
            .map(|&c| {
                let p = c as f64 / total as f64;
                -p * p.ln()
            })
            .sum();
        let lm = train_ngram(&corpus, &vocab, 1, 1e-12, false).unwrap();
        let ppl = lm.perplexity(&corpus).unwrap();
        ensure!(
            (ppl - entropy.exp()).abs() <= 1e-6,
            "case {case}: {ppl} vs {}",
            entropy.exp()
        );
    }

    let uniform = UniformScorer::new(4);
    let corpus = vec![vec![2, 3, 2], vec![3]];
    for include_eot in [false, true] {
        let ppl = perplexity(&uniform, &corpus, 1, include_eot).unwrap();
        ensure!(ppl == 4.0, "uniform |V| = 4 gave {ppl}");
    }
    Ok("MLE unigram = exp(H) within 1e-6 on 51 corpora; uniform = |V| exactly".into())
}

fn trend_a(report: &SuiteReport) -> Check {
    let base = report.row("lm0-hp-on").ok_or("missing lm0-hp-on")?.corpus_wer;
    let fused = report.row("lm0.3-hp-on").ok_or("missing lm0.3-hp-on")?.corpus_wer;
    ensure!(base - fused >= 0.02, "WER lambda=0 {base:.4}, lambda=0.3 {fused:.4}");
    Ok(format!("corpus WER {:.2}% -> {:.2}%", 100.0 * base, 100.0 * fused))
}

fn trend_b() -> Check {
    let report = run_suite(&suite::eot_continuation(SEED).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let on = report.row("lm0.3-gate-on").ok_or("missing gate-on")?.corpus_wer;
    let off = report.row("lm0.3-gate-off").ok_or("missing gate-off")?.corpus_wer;
    ensure!(on < off, "gate on {on:.4} not below gate off {off:.4}");
    Ok(format!(
        "corpus WER gate off {:.2}% -> on {:.2}%",
        100.0 * off,
        100.0 * on
    ))
}

fn trend_c() -> Check {
    let s = suite::hallucination(SEED).map_err(|e| e.to_string())?;
    let report = run_suite(&s).map_err(|e| e.to_string())?;
    let off = report.run("lm0.3-hp-off").ok_or("missing hp-off")?;
    let on = report.run("lm0.3-hp-on").ok_or("missing hp-on")?;
    let mut loops = 0;
    for ((r_off, r_on), reference) in off.records.iter().zip(&on.records).zip(&s.references) {
        if !reference.sample_id.contains("loop") {
            continue;
        }
        loops += 1;
        let doubled = format!("{0} {0}", reference.text);
        ensure!(
            r_off.text == doubled && r_on.text == reference.text,
            "{}: without penalty {:?}, with penalty {:?}",
            reference.sample_id,
            r_off.text,
            r_on.text
        );
    }
    ensure!(loops > 0, "no looping samples in the suite");
    let top = |name: &str| {
        report
            .sweep_for(name)
            .find(|r| (r.fraction - 0.2).abs() < 1e-12)
            .map(|r| r.mean_wer)
    };
    let (w_off, w_on) = (
        top("lm0.3-hp-off").ok_or("no sweep")?,
        top("lm0.3-hp-on").ok_or("no sweep")?,
    );
    ensure!(
        w_on < w_off,
        "top-20% mean WER with penalty {w_on:.4} vs without {w_off:.4}"
    );
    Ok(format!(
        "{loops}/{loops} loop samples flip; top-20% mean WER {:.2}% -> {:.2}%",
        100.0 * w_off,
        100.0 * w_on
    ))
}

fn trend_d(report: &SuiteReport) -> Check {
    let run = report.run("lm0.3-hp-on").ok_or("missing lm0.3-hp-on")?;
    let neg_alp: Vec<f64> = run.records.iter().map(|r| -r.alp).collect();
    let wers: Vec<f64> = run.wers.iter().map(|w| w.wer).collect();
    let rho = spearman(&neg_alp, &wers).ok_or("spearman undefined")?;
    ensure!(rho >= 0.3, "spearman {rho:.4} < 0.3");
    Ok(format!("spearman(-ALP, WER) = {rho:.3}"))
}

fn trend_e() -> Check {
    let report = run_suite(&suite::heterogeneous(SEED).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut sweep: Vec<(f64, f64)> = report
        .sweep_for("lm0.3-hp-on")
        .map(|r| (r.fraction, r.mean_wer))
        .collect();
    sweep.sort_by(|a, b| a.0.total_cmp(&b.0));
    ensure!(sweep.len() == 5, "expected 5 sweep points, got {}", sweep.len());
    let drops: Vec<f64> = sweep.windows(2).map(|w| w[0].1 - w[1].1).filter(|d| *d > 0.0).collect();
    ensure!(
        drops.len() <= 1 && drops.iter().all(|d| *d <= 0.01),
        "mean WER not monotone: {sweep:?}"
    );
    let shown: Vec<String> = sweep.iter().map(|(f, w)| format!("{f}:{:.2}%", 100.0 * w)).collect();
    Ok(format!("mean WER by fraction {}", shown.join(" ")))
}

fn round_trips() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = suite::noisy_channel(SEED).map_err(|e| e.to_string())?;

    let vjson = s.vocab.to_json();
    let vocab = Vocabulary::from_json(&vjson).map_err(|e| e.to_string())?;
    ensure!(
        vocab == s.vocab && vocab.to_json() == vjson,
        "vocabulary changed on reload"
    );
    let char_vocab = Vocabulary::with_specials(["x", "y"], TokenMode::Char).unwrap();
    ensure!(
        Vocabulary::from_json(&char_vocab.to_json()).unwrap().to_json() == char_vocab.to_json(),
        "char vocabulary changed on reload"
    );

    let corpus = lmfuse::manifest::parse_corpus(&s.corpus.join("\n"), &vocab).map_err(|e| e.to_string())?;
    let lm = train_ngram(&corpus, &vocab, 3, 0.5, true).map_err(|e| e.to_string())?;
    let path = dir.path().join("lm.json");
    lm.save(&path).map_err(|e| e.to_string())?;
    let back = NGramLm::load(&path).map_err(|e| e.to_string())?;
    ensure!(back.to_json() == lm.to_json(), "LM JSON changed on reload");
    for seq in corpus.iter().take(50) {
        let (mut x, mut y) = (lm.initial_state(), back.initial_state());
        for &t in seq {
            ensure!(lm.score(&x) == back.score(&y), "LM distributions differ after reload");
            x = lm.advance(&x, t).unwrap();
            y = back.advance(&y, t).unwrap();
        }
    }

    for input in s.inputs.iter().take(20) {
        let json = input.scenario.to_json();
        let back = AcousticScenario::from_json(&json).map_err(|e| e.to_string())?;
        ensure!(
            back == input.scenario && back.to_json() == json,
            "scenario {} changed",
            input.sample_id
        );
    }

    let report = run_suite(&s).map_err(|e| e.to_string())?;
    let mut records: Vec<SampleRecord> = report.runs[0].records.clone();
    records.push(SampleRecord::failed(
        "broken",
        "missing.json",
        &lmfuse::Error::NoHypothesis,
    ));
    let mpath = dir.path().join("manifest.jsonl");
    write_manifest(&mpath, &records).map_err(|e| e.to_string())?;
    let back = read_manifest(&mpath).map_err(|e| e.to_string())?;
    ensure!(to_jsonl(&back) == to_jsonl(&records), "manifest changed on reload");

    let sdir = dir.path().join("suite");
    s.write(&sdir).map_err(|e| e.to_string())?;
    let loaded = suite::Suite::load(&sdir).map_err(|e| e.to_string())?;
    ensure!(
        loaded.config == s.config && loaded.references == s.references && loaded.corpus == s.corpus,
        "suite changed on reload"
    );
    Ok("vocabulary, LM, scenario, manifest and suite files reload byte-identically".into())
}

fn main() {
    // trends A and D share one run of the noisy-channel suite; A is charged for it
    let t = Instant::now();
    let noisy = suite::noisy_channel(SEED)
        .and_then(|s| run_suite(&s))
        .map_err(|e| e.to_string());
    let noisy_time = t.elapsed();
    let with_noisy = |f: fn(&SuiteReport) -> Check| -> Check { noisy.as_ref().map_err(Clone::clone).and_then(f) };

    type Criterion<'a> = (&'a str, u64, Box<dyn Fn() -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("fusion exactness", 1, Box::new(fusion_exactness)),
        ("EOT gate", 1, Box::new(eot_gate)),
        ("cycle detection oracle", 10, Box::new(cycle_oracle)),
        ("penalty arithmetic", 1, Box::new(penalty_arithmetic)),
        ("beam / exhaustive oracle", 60, Box::new(beam_oracle)),
        ("WER oracle", 5, Box::new(wer_oracle)),
        ("perplexity identities", 5, Box::new(perplexity_identity)),
        (
            "trend A: LM fusion lowers WER",
            120,
            Box::new(move || with_noisy(trend_a)),
        ),
        ("trend B: EOT gate lowers WER", 60, Box::new(trend_b)),
        ("trend C: repetition penalty", 60, Box::new(trend_c)),
        ("trend D: ALP ranks WER", 60, Box::new(move || with_noisy(trend_d))),
        ("trend E: selection fraction sweep", 180, Box::new(trend_e)),
        ("file round-trips", 5, Box::new(round_trips)),
    ];

    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let mut outcome = check();
        let mut elapsed = t.elapsed();
        if i == 7 {
            elapsed += noisy_time;
        }
        if outcome.is_ok() && elapsed > Duration::from_secs(*budget) {
            outcome = Err(format!("took {:.1}s, budget {budget}s", elapsed.as_secs_f64()));
        }
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {status} {name} [{:.2}s]: {detail}",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

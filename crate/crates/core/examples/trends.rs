use lmfuse::metrics::spearman;
use lmfuse::suite::*;

fn show(r: &SuiteReport) {
    println!("== {} ppl {:.3}", r.suite, r.lm_train_perplexity);
    for row in &r.rows {
        println!(
            "  {:16} cwer {:.4} mwer {:.4} alp {:.3} trunc {} cyc {}",
            row.config, row.corpus_wer, row.mean_wer, row.mean_alp, row.truncated, row.cyclic
        );
    }
    for s in &r.sweep {
        println!(
            "  sweep {:16} f {} n {} cwer {:.4} mwer {:.4}",
            s.config, s.fraction, s.selected, s.corpus_wer, s.mean_wer
        );
    }
    for run in &r.runs {
        let x: Vec<f64> = run.records.iter().map(|r| -r.alp).collect();
        let y: Vec<f64> = run.wers.iter().map(|w| w.wer).collect();
        println!("  spearman {:16} {:?}", run.row.config, spearman(&x, &y));
    }
}

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    for s in [
        noisy_channel(seed),
        eot_continuation(seed),
        hallucination(seed),
        heterogeneous(seed),
    ] {
        let s = s.unwrap();
        let r = run_suite(&s).unwrap();
        show(&r);
    }
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails. Built with `harness = false` so the lines
//! are always visible.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use strategia::experiments::{run_experiment, ExperimentName, ExperimentOutput, ExperimentParams, RunContext};
use strategia::scenarios::{gen_example1, gen_example2};
use strategia::table::Cell;

const SEED: u64 = 7;

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

fn ctx() -> RunContext {
    RunContext {
        seed: SEED,
        workers: workers(),
    }
}

fn run(name: ExperimentName, params: ExperimentParams) -> Result<ExperimentOutput, String> {
    run_experiment(name, &params, ctx()).map_err(|e| e.to_string())
}

fn require_checks(out: &ExperimentOutput) -> Result<(), String> {
    let failed: Vec<String> = out.failures().map(|c| format!("{} [{}]", c.name, c.detail)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(failed.join("; "))
    }
}

fn float(out: &ExperimentOutput, row: usize, col: &str) -> f64 {
    match out.table.get(row, col) {
        Some(Cell::Float(v)) => *v,
        Some(Cell::Int(v)) => *v as f64,
        other => panic!("column {col} row {row}: {other:?}"),
    }
}

fn text(out: &ExperimentOutput, row: usize, col: &str) -> String {
    out.table.get(row, col).map(|c| c.to_string()).unwrap_or_default()
}

/// Strategic loss on the forward chain 0 -> 1 -> 2 -> 3 by direct case
/// analysis: a point pays if misclassified, or if labeled 0 while its
/// successor is labeled 1.
fn chain_strategic_loss(labels: [bool; 4], p: [(bool, f64); 4]) -> f64 {
    let mut total = 0.0;
    for x in 0..4 {
        let (y, w) = p[x];
        let wrong = labels[x] != y;
        let moves = !labels[x] && x + 1 < 4 && labels[x + 1];
        if wrong || moves {
            total += w;
        }
    }
    total
}

fn c1() -> Result<String, String> {
    let out = run(ExperimentName::Example2, ExperimentParams::default())?;
    require_checks(&out)?;
    // Independent recomputation of each row's losses and argmin.
    for r in 0..out.table.len() {
        let p2 = float(&out, r, "p2");
        let p3 = float(&out, r, "p3");
        let p = [(false, 0.25), (false, p2), (true, p3), (true, 0.25)];
        let l25 = chain_strategic_loss([false, false, true, true], p);
        let l35 = chain_strategic_loss([false, false, false, true], p);
        if l25 != float(&out, r, "loss_h2.5") || l35 != float(&out, r, "loss_h3.5") {
            return Err(format!("row {r}: oracle losses {l25}, {l35} disagree"));
        }
        if l25 != p2 || l35 != p3 {
            return Err(format!("row {r}: losses are not P((2,0)), P((3,1))"));
        }
        let expected = if p2 < p3 { Some("h_2.5") } else if p2 > p3 { Some("h_3.5") } else { None };
        if let Some(e) = expected {
            if text(&out, r, "strategic_erm") != e {
                return Err(format!("row {r}: ERM {} expected {e}", text(&out, r, "strategic_erm")));
            }
        }
        if text(&out, r, "performative_erm") != "h_3.5" {
            return Err(format!("row {r}: performative ERM {}", text(&out, r, "performative_erm")));
        }
    }
    // A spot instance straight from the generator.
    let s = gen_example2([0.25, 0.05, 0.45, 0.25]).map_err(|e| e.to_string())?;
    if s.class.len() != 5 {
        return Err(format!("threshold class has {} members", s.class.len()));
    }
    Ok(format!("{} weightings swept", out.table.len()))
}

fn c2() -> Result<String, String> {
    let out = run(ExperimentName::Example1, ExperimentParams::default())?;
    require_checks(&out)?;
    // Independent IC test: on the bidirectional chain a labeling is IC iff
    // no 0 sits next to a 1.
    let s = gen_example1(10).map_err(|e| e.to_string())?;
    let ic: Vec<String> = s
        .class
        .iter()
        .filter(|h| (0..9).all(|x| h.label(x) == h.label(x + 1)))
        .map(|h| h.bit_string())
        .collect();
    if ic != ["0000000000", "1111111111"] && ic != ["1111111111", "0000000000"] {
        return Err(format!("direct IC set {ic:?}"));
    }
    for r in 0..out.table.len() {
        let flagged = text(&out, r, "incentive_compatible") == "true";
        let labels = text(&out, r, "labels");
        if flagged != ic.contains(&labels) {
            return Err(format!("row {r}: {labels} flagged {flagged}"));
        }
    }
    Ok("IC set = both constants, IC-ERM binary loss 0.5".into())
}

fn c3() -> Result<String, String> {
    let out = run(
        ExperimentName::Obs1,
        ExperimentParams {
            d: Some(vec![2, 3]),
            ..Default::default()
        },
    )?;
    require_checks(&out)?;
    let summary: Vec<String> = (0..out.table.len())
        .map(|r| format!("d={}: VC(H)={}, VC(strategic)={}", text(&out, r, "d"), text(&out, r, "vc_class"), text(&out, r, "vc_strategic")))
        .collect();
    Ok(summary.join("; "))
}

fn c4() -> Result<String, String> {
    let out = run(ExperimentName::Obs2, ExperimentParams::default())?;
    require_checks(&out)?;
    if out.table.len() != 500 {
        return Err(format!("{} instances", out.table.len()));
    }
    for r in 0..out.table.len() {
        if float(&out, r, "points") > 8.0 || float(&out, r, "class_size") > 16.0 {
            return Err(format!("row {r} outside n <= 8, |H| <= 16"));
        }
    }
    Ok("500 instances, no violation".into())
}

fn c5() -> Result<String, String> {
    let delta = 0.1;
    let out = run(ExperimentName::Thm3, ExperimentParams::default())?;
    require_checks(&out)?;
    let mut notes = Vec::new();
    for eps in [0.05, 0.1] {
        let n_star = ((1.0f64 / delta).ln() / (2.0 * eps)).ceil() as usize;
        let row = (0..out.table.len())
            .find(|&r| float(&out, r, "epsilon") == eps && float(&out, r, "n") as usize == n_star)
            .ok_or_else(|| format!("no row for eps={eps}, n={n_star}"))?;
        let rate = float(&out, row, "failure_rate");
        if float(&out, row, "trials") != 2000.0 {
            return Err("expected 2000 trials".into());
        }
        if rate > delta + 0.05 {
            return Err(format!("eps={eps}: failure {rate} at n={n_star}"));
        }
        // The learner fails iff no positive point shows up in n draws.
        let theory = (1.0 - 2.0 * eps).powi(n_star as i32);
        if (rate - theory).abs() > 0.03 {
            return Err(format!("eps={eps}: failure {rate} far from (1-2eps)^n = {theory}"));
        }
        notes.push(format!("eps={eps} n={n_star} failure={rate:.4}"));
    }
    Ok(notes.join("; "))
}

fn c6() -> Result<String, String> {
    let out = run(ExperimentName::Thm4, ExperimentParams::default())?;
    require_checks(&out)?;
    let pooled: Vec<String> = (0..out.table.len())
        .filter(|&r| text(&out, r, "instance") == "all")
        .map(|r| format!("n={} median={} mean={:.4}", text(&out, r, "n"), text(&out, r, "median_excess"), float(&out, r, "mean_excess")))
        .collect();
    Ok(pooled.join("; "))
}

fn c7() -> Result<String, String> {
    let out = run(ExperimentName::Thm5, ExperimentParams::default())?;
    require_checks(&out)?;
    // Recheck every row from the emitted terms.
    let slack = -1e-12;
    for r in 0..out.table.len() {
        let t = float(&out, r, "true_strategic");
        let ok = float(&out, r, "upper1") - t >= slack
            && float(&out, r, "upper2") - t >= slack
            && t - float(&out, r, "lower") >= slack;
        if !ok {
            return Err(format!("row {r} violates a bound"));
        }
    }
    Ok(format!("{} draws, zero violations", out.table.len()))
}

fn c8() -> Result<String, String> {
    let out = run(ExperimentName::GraphIdentity, ExperimentParams::default())?;
    require_checks(&out)?;
    let pairs: f64 = (0..out.table.len()).map(|r| float(&out, r, "pairs_checked")).sum();
    Ok(format!("{} instances, {pairs} (h, x) pairs", out.table.len()))
}

fn c9() -> Result<String, String> {
    let out = run(ExperimentName::UniformConv, ExperimentParams::default())?;
    require_checks(&out)?;
    let meds: Vec<f64> = (0..out.table.len()).map(|r| float(&out, r, "median_sup_deviation")).collect();
    let ratios: Vec<String> = meds.windows(2).map(|w| format!("{:.3}", w[0] / w[1])).collect();
    Ok(format!("ratios {}; learned-bound rate {}", ratios.join(", "), text(&out, out.table.len() - 1, "learned_bound_rate")))
}

fn c10() -> Result<String, String> {
    let out = run(ExperimentName::Appendix, ExperimentParams::default())?;
    require_checks(&out)?;
    Ok("all appendix spot checks hold".into())
}

fn c11() -> Result<String, String> {
    let out = run(ExperimentName::Oracles, ExperimentParams::default())?;
    require_checks(&out)?;
    let worst = (0..out.table.len())
        .map(|r| float(&out, r, "loss_diff").max(float(&out, r, "graph_loss_diff")).max(float(&out, r, "distance_diff")))
        .fold(0.0f64, f64::max);
    Ok(format!("{} instances, worst difference {worst:e}", out.table.len()))
}

fn c12() -> Result<String, String> {
    let dir = std::env::temp_dir().join(format!("strategia-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for name in ExperimentName::ALL {
        let mut files = Vec::new();
        for w in ["1", "8"] {
            let path = dir.join(format!("{}-{w}.csv", name.as_str()));
            let args = ["strategia", "experiment", name.as_str(), "--seed", "7", "--workers", w, "--out", path.to_str().unwrap()];
            let code = strategia::cli::run(args, &mut std::io::sink(), &mut std::io::sink());
            if code == 2 {
                return Err(format!("{} exited with a usage error", name.as_str()));
            }
            files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        if files[0] != files[1] {
            return Err(format!("{}: CSV differs between 1 and 8 workers", name.as_str()));
        }
        compared += 1;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{compared} experiments byte-identical at 1 and 8 workers"))
}

type Criterion = (&'static str, &'static str, Duration, fn() -> Result<String, String>);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("C1", "Example 2 exact reproduction", Duration::from_secs(1), c1),
        ("C2", "Example 1 exact reproduction", Duration::from_secs(1), c2),
        ("C3", "Observation 1 shattering", Duration::from_secs(10), c3),
        ("C4", "Observation 2 property suite", Duration::from_secs(60), c4),
        ("C5", "Theorem 3 sample-size shape", Duration::from_secs(60), c5),
        ("C6", "Theorem 4 convergence", Duration::from_secs(300), c6),
        ("C7", "Theorem 5 surrogate bounds", Duration::from_secs(60), c7),
        ("C8", "graph-loss identity", Duration::from_secs(30), c8),
        ("C9", "uniform convergence of graph distances", Duration::from_secs(300), c9),
        ("C10", "Appendix B/C spot checks", Duration::from_secs(300), c10),
        ("C11", "oracle equivalence", Duration::from_secs(60), c11),
        ("C12", "determinism across worker counts", Duration::from_secs(600), c12),
    ];
    let mut failures = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; took {elapsed:?}, limit {limit:?}")),
            Err(e) => (false, e),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} {id} {name} ({:.2}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

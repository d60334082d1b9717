//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::net::SocketAddr;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use infodensity_cli::cli::AnalyzeArgs;
use infodensity_cli::commands::{analyze, build_engine};
use infodensity_cli::server::{self, ScoreResponse};
use infodensity_cli::EngineConfig;
use infodensity_core::analysis::{cohens_d, curve_area, interpolate_values, roc_auc};
use infodensity_core::entropy::{build_trajectory, EntropyTrajectory, TokenDistribution};
use infodensity_core::ingest::{load_jsonl, LabeledTraceRecord, RolloutRecord, StepLabel, Strictness};
use infodensity_core::judge::BackendKind;
use infodensity_core::reward::{
    auc_reward, auc_score, length_scaling, monotonicity_reward, quality_reward, score_group, score_groups,
    GroupTrace, RewardFlag, RewardParams, RolloutGroup,
};
use infodensity_core::Exec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn traj(values: &[f64]) -> EntropyTrajectory {
    build_trajectory("t", values.to_vec()).expect("valid trajectory")
}

fn group(trajs: &[Vec<f64>], lengths: &[u64]) -> RolloutGroup {
    RolloutGroup {
        question_id: "q".into(),
        ground_truth: "1".into(),
        traces: trajs
            .iter()
            .zip(lengths)
            .enumerate()
            .map(|(i, (v, &l))| GroupTrace {
                trace_id: format!("t{i}"),
                steps: vec!["s".into(); v.len() - 1],
                extracted_answer: Some("1".into()),
                length_tokens: l,
                trajectory: build_trajectory(format!("t{i}"), v.clone()).expect("valid trajectory"),
            })
            .collect(),
    }
}

// ---- entropy oracle ----

/// Neumaier-compensated sum of p ln p, each product split into its rounded
/// value and the fma residual.
fn reference_entropy(probs: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut add = |x: f64| {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    };
    for &p in probs.iter().filter(|&&p| p >= 1e-12) {
        let l = p.ln();
        let prod = p * l;
        add(-prod);
        add(-p.mul_add(l, -prod));
    }
    sum + comp
}

fn entropy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let k = rng.random_range(1..=64);
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3) + 1e-9).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    let started = Instant::now();
    let dists: Vec<TokenDistribution> = cases
        .iter()
        .map(|p| TokenDistribution::from_probabilities(p).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let entropies: Vec<f64> = dists.iter().map(TokenDistribution::entropy).collect();
    let elapsed = started.elapsed();
    let mut worst = 0.0f64;
    for (p, h) in cases.iter().zip(&entropies) {
        let r = reference_entropy(p);
        let rel = if r == 0.0 { h.abs() } else { ((h - r) / r).abs() };
        worst = worst.max(rel);
    }
    ensure!(worst <= 1e-10, "worst relative error {worst:e}");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("1000 distributions, worst relative error {worst:.1e}, {elapsed:?}"))
}

// ---- reward formulas ----

fn reward_formulas() -> Outcome {
    let p = RewardParams::default();
    let e = |r: Result<f64, _>| r.map_err(|e: infodensity_core::reward::RewardError| e.to_string());
    let a = traj(&[2.0, 1.0, 0.0]);
    ensure!(e(auc_score(&a, &p))? == 0.25, "AUC of [2,1,0]");
    ensure!(e(auc_reward(&a, &p))? == 0.75, "R_AUC of [2,1,0]");
    let mono = e(monotonicity_reward(&traj(&[2.0, 1.0, 1.5, 0.5])))?;
    ensure!(mono == 2.0 / 3.0, "R_mono of [2,1,1.5,0.5] = {mono}");
    let mix = quality_reward(0.75, 2.0 / 3.0, &p);
    ensure!((mix - 17.0 / 24.0).abs() <= 1e-9, "mix {mix}");
    ensure!(length_scaling(&[300, 300, 300], 0.05) == vec![1.0; 3], "equal lengths");
    // lengths 1 and 3: mean 2, population sd 1, so the longer trace has z = 1
    let rl = length_scaling(&[1, 3], 0.05);
    ensure!((rl[1] - 0.951_229_424_500_714).abs() <= 1e-9, "exp(-0.05) gave {}", rl[1]);
    ensure!((rl[0] - 1.051_271_096_376_024).abs() <= 1e-9, "exp(0.05) gave {}", rl[0]);
    let g = group(&[vec![2.0, 1.0, 0.0], vec![2.0, 2.0, 2.0]], &[100, 100]);
    let wrong = score_group(&g, &p, &[false, false]).map_err(|e| e.to_string())?;
    ensure!(wrong.iter().all(|b| b.final_reward == 0.0), "incorrect traces paid");
    let right = score_group(&g, &p, &[true, true]).map_err(|e| e.to_string())?;
    ensure!(right[0].final_reward == 0.875 && right[1].final_reward == 0.0, "group example {right:?}");
    Ok(format!("mix {mix:.6}, exp(-0.05) {:.6}, group [2,1,0]/[2,2,2] -> 0.875/0", rl[1]))
}

// ---- invariances ----

fn random_values(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = rng.random_range(1..=12);
    let mut v = vec![rng.random_range(0.1..3.0)];
    v.extend((0..t).map(|_| rng.random_range(0.0..3.0)));
    v
}

fn invariances() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = RewardParams::default();
    let mut violations = Vec::new();
    for case in 0..500 {
        let v = random_values(&mut rng);
        let t = traj(&v);

        let c = rng.random_range(0.1..10.0);
        let scaled = traj(&v.iter().map(|x| x * c).collect::<Vec<_>>());
        let (ra, rb) = (auc_reward(&t, &p).unwrap(), auc_reward(&scaled, &p).unwrap());
        let (ma, mb) = (monotonicity_reward(&t).unwrap(), monotonicity_reward(&scaled).unwrap());
        if (ra - rb).abs() > 1e-12 || ma != mb {
            violations.push(format!("case {case}: scale {c}"));
        }

        let ig: f64 = t.information_gains().sum();
        if (ig - (t.initial() - t.last())).abs() > 1e-12 {
            violations.push(format!("case {case}: telescoping"));
        }

        let g = rng.random_range(1..=6);
        let lengths: Vec<u64> = (0..g).map(|_| rng.random_range(1..4000)).collect();
        let shift = rng.random_range(0..1_000_000u64);
        let shifted: Vec<u64> = lengths.iter().map(|l| l + shift).collect();
        if length_scaling(&lengths, p.lambda) != length_scaling(&shifted, p.lambda) {
            violations.push(format!("case {case}: length shift {shift}"));
        }

        let mut trajs: Vec<Vec<f64>> = (1..g).map(|_| random_values(&mut rng)).collect();
        trajs.insert(0, v.clone());
        let correct: Vec<bool> = (0..g).map(|_| rng.random_bool(0.7)).collect();
        let base = score_group(&group(&trajs, &lengths), &p, &correct).unwrap();
        let mut order: Vec<usize> = (0..g).collect();
        order.shuffle(&mut rng);
        let perm = group(
            &order.iter().map(|&i| trajs[i].clone()).collect::<Vec<_>>(),
            &order.iter().map(|&i| lengths[i]).collect::<Vec<_>>(),
        );
        let perm_correct: Vec<bool> = order.iter().map(|&i| correct[i]).collect();
        let permuted = score_group(&perm, &p, &perm_correct).unwrap();
        for (k, &i) in order.iter().enumerate() {
            let (a, b) = (&base[i], &permuted[k]);
            if (a.final_reward, a.r_length, a.r_quality) != (b.final_reward, b.r_length, b.r_quality) {
                violations.push(format!("case {case}: permutation"));
                break;
            }
        }
    }
    ensure!(violations.is_empty(), "{} violations, first {}", violations.len(), violations[0]);
    Ok("500 trajectories, 0 violations".into())
}

// ---- statistics oracles ----

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for set in 0..200 {
        let coarse = rng.random_bool(0.5);
        let (np, nn) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if coarse { rng.random_range(0..6) as f64 } else { rng.random::<f64>() })
                .collect()
        };
        let (pos, neg) = (draw(np), draw(nn));
        let mut doubled = 0u64;
        for a in &pos {
            for b in &neg {
                doubled += if a > b { 2 } else if a == b { 1 } else { 0 };
            }
        }
        let brute = doubled as f64 / (2 * np * nn) as f64;
        let roc = roc_auc(&pos, &neg).map_err(|e| e.to_string())?;
        ensure!(roc.auc == brute, "set {set}: {} vs {brute}", roc.auc);
        ensure!((curve_area(&roc.points) - brute).abs() <= 1e-12, "set {set}: curve area");
    }
    let d = cohens_d(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    ensure!((d.abs() - 1.0).abs() <= 1e-12, "cohen's d {d}");
    let interp = interpolate_values(&[2.0, 1.0, 0.0], 5).map_err(|e| e.to_string())?;
    ensure!(interp == vec![2.0, 1.5, 1.0, 0.5, 0.0], "interpolation {interp:?}");
    Ok(format!("200 ROC sets exact, d = {d}, interp {interp:?}"))
}

// ---- pipeline on planted data ----

/// Mean position of the first incorrect label, read straight from the labels.
fn planted_fraction(records: &[LabeledTraceRecord]) -> f64 {
    let fracs: Vec<f64> = records
        .iter()
        .filter(|r| !r.trace_correct)
        .filter_map(|r| {
            let e = r.step_labels.iter().position(|l| *l == StepLabel::Incorrect)?;
            Some(e as f64 / (r.steps.len() - 1) as f64)
        })
        .collect();
    fracs.iter().sum::<f64>() / fracs.len() as f64
}

fn pipeline(rt: &tokio::runtime::Runtime) -> Outcome {
    let labeled = fixtures().join("labeled.jsonl");
    let mut cfg = EngineConfig::default();
    cfg.judge.backend = BackendKind::Mock;
    cfg.judge.mock_fixture = Some(fixtures().join("labeled_judge.json"));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let args = AnalyzeArgs {
        labeled: Some(labeled.clone()),
        out_dir: Some(dir.path().to_path_buf()),
        interp_n: None,
        strict: true,
    };
    let started = Instant::now();
    let s = rt.block_on(analyze(&cfg, &args)).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    let (fc, fi) = (
        s.mean_final_entropy_correct.ok_or("no correct group")?,
        s.mean_final_entropy_incorrect.ok_or("no incorrect group")?,
    );
    ensure!(fc < 0.5 * fi, "final entropy {fc} vs {fi}");
    let auc = s.roc_auc.ok_or("roc missing")?;
    ensure!(auc > 0.9, "roc auc {auc}");
    let records = load_jsonl::<LabeledTraceRecord>(&labeled, Strictness::Strict)
        .map_err(|e| e.to_string())?
        .records;
    let planted = planted_fraction(&records);
    let marker = s.first_error_marker.ok_or("marker missing")?;
    ensure!((marker - planted).abs() <= 0.05, "marker {marker} vs planted {planted}");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "final entropy {fc:.4} vs {fi:.4}, auc {auc:.4}, marker {marker:.4} (planted {planted:.4}), {elapsed:?}, mock judge"
    ))
}

// ---- determinism and service parity ----

fn score_with_binary(cfg: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_infodensity"))
        .env_remove("INFODENSITY_LAMBDA")
        .env_remove("INFODENSITY_ALPHA")
        .arg("--config")
        .arg(cfg)
        .args(["--log-level", "error", "score", "--rollouts"])
        .arg(fixtures().join("rollouts.jsonl"))
        .arg("--out")
        .arg(out)
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "score exited with {status}");
    std::fs::read(out).map_err(|e| e.to_string())
}

fn determinism(rt: &tokio::runtime::Runtime) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("c.toml");
    let fixture = fixtures().join("mock_judge.json");
    std::fs::write(&cfg_path, format!("[judge]\nbackend = \"mock\"\nmock_fixture = {fixture:?}\n"))
        .map_err(|e| e.to_string())?;
    let a = score_with_binary(&cfg_path, &dir.path().join("a.jsonl"))?;
    let b = score_with_binary(&cfg_path, &dir.path().join("b.jsonl"))?;
    ensure!(a == b, "two score runs differ");
    let cli_lines: Vec<String> = String::from_utf8_lossy(&a).lines().map(str::to_owned).collect();

    let cfg = EngineConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    let engine = build_engine(&cfg).map_err(|e| e.to_string())?;
    let groups = load_jsonl::<RolloutRecord>(&fixtures().join("rollouts.jsonl"), Strictness::Strict)
        .map_err(|e| e.to_string())?
        .records;
    let service_lines: Vec<String> = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let addr: SocketAddr = listener.local_addr().map_err(|e| e.to_string())?;
        let app = server::router(Arc::new(engine));
        let handle = tokio::spawn(async move { axum_serve(listener, app).await });
        let client = reqwest::Client::new();
        let mut lines = Vec::new();
        for g in &groups {
            let resp = client
                .post(format!("http://{addr}/v1/score"))
                .json(g)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            ensure!(resp.status().is_success(), "service returned {}", resp.status());
            let body: ScoreResponse = resp.json().await.map_err(|e| e.to_string())?;
            ensure!(body.group_id == g.group_id, "group id echoed wrongly");
            for r in &body.rewards {
                lines.push(serde_json::to_string(r).map_err(|e| e.to_string())?);
            }
        }
        handle.abort();
        Ok::<_, String>(lines)
    })?;
    ensure!(cli_lines == service_lines, "service output differs from the score file");
    Ok(format!("{} records byte-identical across 2 runs and /v1/score", cli_lines.len()))
}

async fn axum_serve(listener: tokio::net::TcpListener, app: axum::Router) {
    let _ = axum::serve(listener, app).await;
}

// ---- degenerate inputs ----

fn degenerate() -> Outcome {
    let p = RewardParams::default();
    let batch = vec![
        (group(&[vec![1.2], vec![1.2, 0.4]], &[50, 80]), vec![true, true]),
        (group(&[vec![2.0, 1.0, 0.5]], &[120]), vec![true]),
    ];
    let scored = score_groups(&batch, &p, Exec::default()).map_err(|e| e.to_string())?;
    let empty = &scored[0][0];
    ensure!(
        empty.final_reward == 0.0 && empty.flags == vec![RewardFlag::NoSteps],
        "T = 0 trace: {empty:?}"
    );
    ensure!(scored[0][1].final_reward > 0.0, "batch neighbour not scored");
    ensure!(scored[1][0].r_length == 1.0, "single trace r_length {}", scored[1][0].r_length);
    ensure!(scored[1][0].final_reward > 0.0, "single trace unscored");

    let tiny = score_group(&group(&[vec![1e-9, 0.5, 1e-10]], &[10]), &p, &[true]).map_err(|e| e.to_string())?;
    let b = &tiny[0];
    ensure!(
        [b.auc, b.r_auc, b.r_mono, b.r_quality, b.final_reward].iter().all(|x| x.is_finite()),
        "non-finite scores {b:?}"
    );
    ensure!(b.auc == 1.0 && b.flags.contains(&RewardFlag::H0Floored), "H0 below floor: {b:?}");
    Ok(format!("T = 0 flagged {:?}, floored H0 gives auc {}, single-trace R_L 1", empty.flags, b.auc))
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("entropy oracle equivalence", Box::new(entropy_oracle)),
        ("reward formula suite", Box::new(reward_formulas)),
        ("invariance suite", Box::new(invariances)),
        ("statistics oracles", Box::new(statistics)),
        ("pipeline on planted synthetic data", Box::new(|| pipeline(&rt))),
        ("end-to-end determinism", Box::new(|| determinism(&rt))),
        ("degenerate handling", Box::new(degenerate)),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(e.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

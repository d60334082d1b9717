//! Seeded synthetic datasets with planted entropy dynamics.
//!
//! Each generator returns records together with a mock-judge fixture whose
//! rows realise the planted trajectory, so the whole pipeline can run
//! offline. Correct traces decay geometrically towards zero. Incorrect
//! traces descend slowly, stall or rise at their first error, then drift
//! around a plateau.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    save_jsonl, IngestError, LabeledTraceRecord, RolloutRecord, RolloutTrace, SegmentationConfig, Segmenter, StepLabel,
    TraceRecord,
};
use crate::judge::{MockEntry, MockFixture, MockTokenization};

/// Vocabulary of the synthetic judge: digits, so numeric answers tokenise
/// one character per position.
pub const VOCABULARY: [&str; 10] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"];

fn max_entropy() -> f64 {
    (VOCABULARY.len() as f64).ln()
}

fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// A distribution over `size` symbols with entropy `target` nats: a blend of
/// uniform and one-hot (peaked at `peak`), with the weight found by bisection.
/// Targets outside `[0, ln size]` are clamped.
pub fn target_entropy_distribution(size: usize, peak: usize, target: f64) -> Vec<f64> {
    assert!(size >= 2 && peak < size);
    let blend = |w: f64| {
        let mut p = vec![w / size as f64; size];
        p[peak] += 1.0 - w;
        p
    };
    if target <= 0.0 {
        return blend(0.0);
    }
    if target >= (size as f64).ln() {
        return blend(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if shannon(&blend(mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    blend(0.5 * (lo + hi))
}

fn rows_for(trajectory: &[f64], answer_len: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<f64>>> {
    trajectory
        .iter()
        .map(|&h| {
            (0..answer_len)
                .map(|_| {
                    let peak = rng.random_range(0..VOCABULARY.len());
                    target_entropy_distribution(VOCABULARY.len(), peak, h)
                })
                .collect()
        })
        .collect()
}

/// Rows for a trace whose prefix-0 row must be shared with other traces of
/// the same question.
fn rows_with_initial(
    initial: &[Vec<f64>],
    rest: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Vec<f64>>> {
    let mut rows = vec![initial.to_vec()];
    rows.extend(rows_for(rest, initial.len(), rng));
    rows
}

fn decaying(h0: f64, steps: usize, ratio: f64) -> Vec<f64> {
    (0..=steps).map(|t| h0 * ratio.powi(t as i32)).collect()
}

fn plateauing(h0: f64, steps: usize, first_error: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let floor = 0.05;
    let pre = rng.random_range(0.80..0.92);
    let mut h = vec![h0];
    for t in 1..=steps {
        let prev = h[t - 1];
        let next = if t <= first_error {
            prev * pre
        } else if t == first_error + 1 {
            prev + rng.random_range(-0.04..0.20)
        } else {
            prev + rng.random_range(-0.05..0.08)
        };
        h.push(next.clamp(floor, max_entropy()));
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedLabeled {
    pub records: Vec<LabeledTraceRecord>,
    pub fixture: MockFixture,
    /// Entropy targets the fixture rows were built to hit.
    pub planted: Vec<Vec<f64>>,
}

/// Labelled traces for analysis: `n_correct` decaying traces followed by
/// `n_incorrect` plateauing ones, one question per trace.
pub fn planted_labeled(seed: u64, n_correct: usize, n_incorrect: usize) -> PlantedLabeled {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut entries = Vec::new();
    let mut planted = Vec::new();

    for i in 0..n_correct + n_incorrect {
        let correct = i < n_correct;
        let h0 = rng.random_range(1.6..2.2);
        let (steps_n, trajectory, first_error) = if correct {
            let t = rng.random_range(4..=8);
            (t, decaying(h0, t, rng.random_range(0.30..0.55)), None)
        } else {
            let t = rng.random_range(5..=8);
            let e = rng.random_range(1..=t / 2);
            (t, plateauing(h0, t, e, &mut rng), Some(e))
        };
        let question = format!("Synthetic problem {i}: combine the given quantities.");
        let ground_truth = format!("{}", rng.random_range(10..100));
        let steps: Vec<String> = (0..steps_n)
            .map(|s| format!("Step {}: update the running value to {}.", s + 1, rng.random_range(0..1000)))
            .collect();
        let step_labels = (0..steps_n)
            .map(|s| match first_error {
                Some(e) if s >= e => StepLabel::Incorrect,
                _ => StepLabel::Correct,
            })
            .collect();
        entries.push(MockEntry {
            question: question.clone(),
            steps: steps.clone(),
            answer: ground_truth.clone(),
            answer_tokens: None,
            rows: rows_for(&trajectory, ground_truth.chars().count(), &mut rng),
        });
        records.push(LabeledTraceRecord {
            trace_id: Some(format!("syn-{i:03}")),
            question,
            ground_truth,
            steps,
            step_labels,
            trace_correct: correct,
            source_dataset: "synthetic".into(),
            first_error_index: first_error,
            length_tokens: Some(rng.random_range(60..400)),
            trajectory: None,
            extra: Default::default(),
        });
        planted.push(trajectory);
    }
    PlantedLabeled {
        records,
        fixture: MockFixture {
            vocabulary: VOCABULARY.iter().map(|s| s.to_string()).collect(),
            tokenization: MockTokenization::PerCharacter,
            entries,
        },
        planted,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRollouts {
    pub records: Vec<RolloutRecord>,
    pub fixture: MockFixture,
}

struct TraceSpec {
    answer: String,
    steps: usize,
    correct: bool,
}

fn trace_text(steps: usize, answer: &str, rng: &mut ChaCha8Rng) -> String {
    let mut parts: Vec<String> = (0..steps - 1)
        .map(|s| {
            format!(
                "Step {}: carry the partial result {} forward.",
                s + 1,
                rng.random_range(0..500)
            )
        })
        .collect();
    parts.push(format!("Therefore the final answer is \\boxed{{{answer}}}."));
    parts.join("\n\n")
}

/// Rollout groups for scoring. The first group holds one correct and one
/// incorrect trace; the others mix three or four traces each.
pub fn planted_rollouts(seed: u64, groups: usize) -> PlantedRollouts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segmenter = Segmenter::new(&SegmentationConfig::default()).expect("default segmentation");
    let mut records = Vec::new();
    let mut entries = Vec::new();

    for g in 0..groups {
        let a = rng.random_range(10..50);
        let b = rng.random_range(10..49);
        let truth = (a + b).to_string();
        let wrong = (a + b + 1).to_string();
        let question = format!("What is {a} + {b}?");
        let specs: Vec<TraceSpec> = if g == 0 {
            vec![
                TraceSpec { answer: truth.clone(), steps: 4, correct: true },
                TraceSpec { answer: wrong.clone(), steps: 5, correct: false },
            ]
        } else {
            (0..rng.random_range(3..=4))
                .map(|_| {
                    let correct = rng.random_bool(0.6);
                    TraceSpec {
                        answer: if correct { truth.clone() } else { wrong.clone() },
                        steps: rng.random_range(2..=6),
                        correct,
                    }
                })
                .collect()
        };

        let h0 = rng.random_range(1.6..2.2);
        let initial = rows_for(&[h0], truth.chars().count(), &mut rng).remove(0);
        let mut traces = Vec::new();
        for (k, spec) in specs.iter().enumerate() {
            let trace_id = format!("g{g}-t{k}");
            let text = trace_text(spec.steps, &spec.answer, &mut rng);
            let parsed = TraceRecord::parse(&trace_id, &question, &text, 0, &segmenter);
            let n = parsed.steps.len();
            let trajectory = if spec.correct {
                decaying(h0, n, rng.random_range(0.35..0.6))
            } else {
                let e = rng.random_range(0..n.max(1));
                plateauing(h0, n, e, &mut rng)
            };
            entries.push(MockEntry {
                question: question.clone(),
                steps: parsed.steps,
                answer: truth.clone(),
                answer_tokens: None,
                rows: rows_with_initial(&initial, &trajectory[1..], &mut rng),
            });
            traces.push(RolloutTrace {
                trace_id,
                text,
                length_tokens: rng.random_range(40..240),
                correct: None,
                extra: Default::default(),
            });
        }
        records.push(RolloutRecord {
            group_id: format!("group-{g}"),
            question,
            ground_truth: truth,
            traces,
            extra: Default::default(),
        });
    }
    PlantedRollouts {
        records,
        fixture: MockFixture {
            vocabulary: VOCABULARY.iter().map(|s| s.to_string()).collect(),
            tokenization: MockTokenization::PerCharacter,
            entries,
        },
    }
}

/// Seeds and sizes of the bundled fixture files.
pub const ROLLOUT_SEED: u64 = 42;
pub const ROLLOUT_GROUPS: usize = 3;
pub const LABELED_SEED: u64 = 7;
pub const LABELED_CORRECT: usize = 10;
pub const LABELED_INCORRECT: usize = 10;

pub const ROLLOUTS_FILE: &str = "rollouts.jsonl";
pub const ROLLOUTS_JUDGE_FILE: &str = "mock_judge.json";
pub const LABELED_FILE: &str = "labeled.jsonl";
pub const LABELED_JUDGE_FILE: &str = "labeled_judge.json";

pub fn bundled_rollouts() -> PlantedRollouts {
    planted_rollouts(ROLLOUT_SEED, ROLLOUT_GROUPS)
}

pub fn bundled_labeled() -> PlantedLabeled {
    planted_labeled(LABELED_SEED, LABELED_CORRECT, LABELED_INCORRECT)
}

/// Writes the bundled rollouts, labelled traces and both judge fixtures.
pub fn write_bundled_fixtures(dir: &Path) -> Result<(), IngestError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let write_json = |name: &str, fixture: &MockFixture| {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(fixture).expect("fixtures serialise") + "\n";
        std::fs::write(&path, text).map_err(io(&path))
    };
    let rollouts = bundled_rollouts();
    save_jsonl(&dir.join(ROLLOUTS_FILE), &rollouts.records)?;
    write_json(ROLLOUTS_JUDGE_FILE, &rollouts.fixture)?;
    let labeled = bundled_labeled();
    save_jsonl(&dir.join(LABELED_FILE), &labeled.records)?;
    write_json(LABELED_JUDGE_FILE, &labeled.fixture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::MockJudgeTable;

    #[test]
    fn bisection_hits_target() {
        for target in [0.0, 0.3, 1.0, 2.0, 10f64.ln()] {
            let p = target_entropy_distribution(10, 3, target);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((shannon(&p) - target).abs() < 1e-12, "target {target}");
        }
        assert_eq!(target_entropy_distribution(4, 0, -1.0), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(planted_labeled(7, 3, 3), planted_labeled(7, 3, 3));
        assert_ne!(planted_labeled(7, 3, 3), planted_labeled(8, 3, 3));
        assert_eq!(planted_rollouts(7, 3), planted_rollouts(7, 3));
    }

    #[test]
    fn fixtures_load_into_tables() {
        let l = planted_labeled(1, 5, 5);
        assert!(MockJudgeTable::from_fixture(&l.fixture).is_ok());
        let r = planted_rollouts(1, 4);
        assert!(MockJudgeTable::from_fixture(&r.fixture).is_ok());
    }

    #[test]
    fn incorrect_traces_stall_at_first_error() {
        let l = planted_labeled(3, 0, 20);
        for (rec, h) in l.records.iter().zip(&l.planted) {
            let e = rec.first_error().unwrap();
            assert!(h[e] - h[e + 1] <= 0.04 + 1e-12);
        }
    }
}

//! End-to-end behaviour across modules.

use std::fs;

use linpot::bandit::{run_episode, ActionSetGenerator, EpisodeConfig, Policy};
use linpot::distributions::{NoiseSpec, PriorSpec};
use linpot::harness::{run_experiment, BoundCheck, ExperimentConfig, RunSettings};
use linpot::posterior::{EngineConfig, PosteriorState};
use linpot::potential::{verify_thm23, ActionRule, Thm23Config};
use linpot::report::{
    load_toml, parse_summary_json, write_run_artifacts, POTENTIAL_HEADER, REGRET_HEADER,
};
use linpot::verify::{counterexample, run_lemma_suite, LemmaSuiteConfig};
use linpot::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn singleton_config() -> ExperimentConfig {
    ExperimentConfig {
        prior: PriorSpec::FiniteSupport {
            atoms: vec![Vector::new(vec![0.3, 0.4]), Vector::new(vec![0.6, 0.1])],
            weights: vec![0.5, 0.5],
        },
        noise: NoiseSpec::BernoulliMean,
        engine: None,
        actions: ActionSetGenerator::Fixed {
            actions: vec![Vector::new(vec![0.6, 0.8])],
        },
        run: RunSettings {
            horizon: 30,
            replications: 8,
            master_seed: 11,
            lambda: 1.0,
            policy: Policy::Lints,
            workers: Some(2),
            bound_checks: BoundCheck::ALL.to_vec(),
        },
    }
}

#[test]
fn singleton_arm_writes_zero_regret_curve() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&singleton_config()).unwrap();
    write_run_artifacts(dir.path(), &outcome).unwrap();

    let regret = fs::read_to_string(dir.path().join("regret_curve.csv")).unwrap();
    let mut lines = regret.lines();
    assert_eq!(lines.next(), Some(REGRET_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 30);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[1], "0");
        assert_eq!(cols[2], "0");
    }
    let potential = fs::read_to_string(dir.path().join("potential.csv")).unwrap();
    assert_eq!(potential.lines().next(), Some(POTENTIAL_HEADER));

    let json = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert_eq!(parse_summary_json(&json).unwrap(), outcome.summary);
    assert!(json.contains("\"pass_eq4\": true"));
    assert!(!json.contains("wall_time"));
    let timing = fs::read_to_string(dir.path().join("timing.json")).unwrap();
    assert!(timing.contains("wall_time_secs"));
}

#[test]
fn worker_count_does_not_change_results() {
    let mut a = singleton_config();
    a.actions = ActionSetGenerator::KarmedRandom { k: 5 };
    let mut b = a.clone();
    a.run.workers = Some(1);
    b.run.workers = Some(4);
    let sa = run_experiment(&a).unwrap().summary;
    let sb = run_experiment(&b).unwrap().summary;
    assert_eq!(sa.regret_curve, sb.regret_curve);
    assert_eq!(sa.potential_curve, sb.potential_curve);
    assert_eq!(sa.final_regret, sb.final_regret);
}

#[test]
fn config_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "[prior]\nkind = \"gaussian\"\nmean = [0.0]\ncov = [[1.0]]\n\n[noise]\nkind = \"gaussian\"\nsd = 1.0\nshape = 2\n",
    )
    .unwrap();
    let err = load_toml::<ExperimentConfig>(&path)
        .unwrap_err()
        .to_string();
    assert!(err.contains("line 9"), "{err}");
    assert!(err.contains("shape"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name.starts_with("bandit_") {
            load_toml::<ExperimentConfig>(&path)
                .unwrap()
                .validate()
                .unwrap();
            seen += 1;
        } else if name.starts_with("potential_") {
            load_toml::<Thm23Config>(&path).unwrap();
            seen += 1;
        } else if name.starts_with("lemmas") {
            load_toml::<LemmaSuiteConfig>(&path)
                .unwrap()
                .validate()
                .unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn counterexample_episode_follows_exact_bayes() {
    let prior = PriorSpec::non_monotone_example(0.05).unwrap();
    let cfg = EpisodeConfig {
        prior: prior.clone(),
        noise: NoiseSpec::BernoulliMean,
        actions: ActionSetGenerator::Fixed {
            actions: vec![Vector::new(vec![1.0])],
        },
        engine: EngineConfig::FiniteSupport,
        horizon: 2,
        lambda: 1.0,
        policy: Policy::Lints,
    };
    for seed in 0..50 {
        let ep = run_episode(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(ep.cumulative_regret(), 0.0);
        let recs = ep.potential.records();
        assert!((recs[0].gamma_quad - 0.031875).abs() < 1e-15);
        if ep.rounds[0].reward == 1.0 {
            assert!((recs[1].gamma_quad - 0.0625).abs() < 1e-15);
        }
    }
    let report = counterexample(0.05, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = PosteriorState::init(
        &prior,
        &NoiseSpec::BernoulliMean,
        &EngineConfig::FiniteSupport,
        &mut rng,
    )
    .unwrap();
    state
        .update(&Vector::new(vec![1.0]), 1.0, &mut rng)
        .unwrap();
    assert_eq!(
        state.weights().unwrap(),
        report.posterior_weights.as_slice()
    );
}

#[test]
fn verification_report_serializes_required_fields() {
    let report = verify_thm23(&Thm23Config {
        prior: PriorSpec::non_monotone_example(0.05).unwrap(),
        noise: NoiseSpec::BernoulliMean,
        horizon: 2,
        rule: ActionRule::Adversarial,
        replications: 1,
        master_seed: 0,
        engine: None,
    })
    .unwrap();
    let json = serde_json::to_value(&report).unwrap();
    for key in [
        "config",
        "mean",
        "stderr",
        "bound",
        "pass",
        "failed_replications",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    // Γ₁ + E[Γ₂] = 0.031875 + P(Y₁=1)·1/16 + P(Y₁=0)·Var(Θ | Y₁=0).
    let p1 = 0.15 * 0.25 + 0.05 * 0.75;
    let w0 = [
        0.8 / (1.0 - p1),
        0.15 * 0.75 / (1.0 - p1),
        0.05 * 0.25 / (1.0 - p1),
    ];
    let atoms = [0.0, 0.25, 0.75];
    let m: f64 = w0.iter().zip(atoms).map(|(w, a)| w * a).sum();
    let v0: f64 = w0.iter().zip(atoms).map(|(w, a)| w * (a - m).powi(2)).sum();
    let want = 0.031875 + p1 * 0.0625 + (1.0 - p1) * v0;
    assert!((report.mean - want).abs() < 1e-14);
    assert!(report.pass && report.exact);
}

#[test]
fn small_lemma_suite_passes() {
    let checks = run_lemma_suite(&LemmaSuiteConfig::default().with_instances(40)).unwrap();
    assert_eq!(checks.len(), 7);
    for c in checks {
        assert!(c.pass, "{c:?}");
        assert_eq!(c.instances, 40);
    }
}

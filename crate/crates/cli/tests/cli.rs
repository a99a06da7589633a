use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use weighted_gibbs_cli::compare::compare;
use weighted_gibbs_cli::config::{
    ChainUnit, GaussianSection, IsingSection, LambdaMode, LdaSection, ValidateSection,
};
use weighted_gibbs_cli::{
    run_experiment, CliError, ExperimentConfig, ExperimentKind, SchedulerKind,
};

fn wgibbs(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wgibbs"))
        .args(args)
        .env("WGIBBS_OUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn small_gaussian() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Gaussian);
    c.chain.iterations = 60;
    c.chain.burn_in = 10;
    c.gaussian = Some(GaussianSection {
        d: 6,
        r: 2,
        max_lag: 5,
        pca_samples: 20,
        ..Default::default()
    });
    c
}

fn small_ising(sigma: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Ising);
    c.chain.iterations = 8;
    c.chain.burn_in = 2;
    c.ising = Some(IsingSection {
        size: 12,
        sigma,
        ..Default::default()
    });
    c
}

fn small_lda() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Lda);
    c.chain.iterations = 6;
    c.lda = Some(LdaSection {
        documents: 40,
        document_length: 20,
        heldout_documents: 10,
        perplexity_every: 3,
        fold_in_sweeps: 3,
        ..Default::default()
    });
    c
}

/// Every file under `dir`, keyed by relative path.
fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let c = ExperimentConfig::load(&p).unwrap();
        assert_eq!(
            ExperimentConfig::parse(&c.to_toml()).unwrap(),
            c,
            "{}",
            p.display()
        );
        n += 1;
    }
    assert!(n >= 5);
}

fn scheduler_list() -> impl Strategy<Value = Vec<SchedulerKind>> {
    proptest::sample::subsequence(SchedulerKind::ALL.to_vec(), 1..=3)
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let kind = prop_oneof![
        Just(ExperimentKind::Gaussian),
        Just(ExperimentKind::Ising),
        Just(ExperimentKind::Lda),
        Just(ExperimentKind::Validate),
    ];
    (
        kind,
        scheduler_list(),
        (
            1u64..100_000,
            any::<u64>(),
            1u64..10,
            0u64..5,
            any::<bool>(),
        ),
        (
            0.0f64..10.0,
            any::<bool>(),
            proptest::option::of(1u64..1000),
            any::<bool>(),
        ),
        proptest::option::of(0.01f64..0.99),
        (1usize..200, 1usize..200, -1e3f64..1e3, 1e-3f64..1e3),
        proptest::option::of("[a-z]{1,8}"),
    )
        .prop_map(
            |(kind, schedulers, chain, weighted, forgetting, model, output)| {
                let mut c = ExperimentConfig::new(kind);
                c.schedulers = schedulers;
                let (iterations, seed, thinning, initial_sweeps, step) = chain;
                c.chain.iterations = iterations;
                c.chain.burn_in = iterations / 2;
                c.chain.seed = seed;
                c.chain.thinning = thinning;
                c.chain.initial_sweeps = initial_sweeps;
                c.chain.unit = if step {
                    ChainUnit::Step
                } else {
                    ChainUnit::Sweep
                };
                let (lambda, fixed, update_period, adapt) = weighted;
                c.weighted.lambda = lambda;
                c.weighted.lambda_mode = if fixed {
                    LambdaMode::Fixed
                } else {
                    LambdaMode::Relative
                };
                c.weighted.update_period = update_period;
                c.weighted.adapt_after_burn_in = adapt;
                c.weighted.forgetting = forgetting;
                let (a, b, x, y) = model;
                c.output = output.map(PathBuf::from);
                match kind {
                    ExperimentKind::Gaussian => {
                        c.gaussian = Some(GaussianSection {
                            d: a,
                            r: b,
                            epsilon: x.abs(),
                            lambda_cov: y,
                            esjd_lags: vec![1, b],
                            ..Default::default()
                        })
                    }
                    ExperimentKind::Ising => {
                        c.ising = Some(IsingSection {
                            size: a,
                            coupling: x,
                            sigma: y,
                            image: (b % 2 == 0).then(|| PathBuf::from("face.pgm")),
                            ..Default::default()
                        })
                    }
                    ExperimentKind::Lda => {
                        c.lda = Some(LdaSection {
                            topics: a,
                            documents: b,
                            alpha: y,
                            beta: y / 7.0,
                            ..Default::default()
                        })
                    }
                    ExperimentKind::Validate => {
                        c.validate = Some(ValidateSection {
                            chains: a,
                            trials: b,
                            ..Default::default()
                        })
                    }
                }
                c
            },
        )
}

proptest! {
    #[test]
    fn config_round_trip_is_identity(c in arb_config()) {
        let text = c.to_toml();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &c);
        prop_assert_eq!(parsed.to_toml(), text);
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(
        tmp.path(),
        "bad.toml",
        "kind = \"ising\"\n[chain]\nsweeps = 10\n",
    );
    let o = wgibbs(&["run", p.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(
        err.starts_with("error: ") && err.contains("sweeps"),
        "{err}"
    );
}

#[test]
fn missing_inputs_are_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wgibbs(&["run", "does-not-exist.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let p = write_config(
        tmp.path(),
        "img.toml",
        "kind = \"ising\"\n[ising]\nimage = \"missing.pgm\"\n",
    );
    let o = wgibbs(&["run", p.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn invalid_values_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for text in [
        "kind = \"gaussian\"\n[chain]\niterations = 10\nburn_in = 10\n",
        "kind = \"ising\"\n[ising]\nsigma = 0.0\n",
        "kind = \"lda\"\n[lda]\ntopics = 0\n",
        "kind = \"gaussian\"\n[ising]\nsigma = 1.0\n",
    ] {
        let p = write_config(tmp.path(), "c.toml", text);
        let o = wgibbs(&["run", p.to_str().unwrap()], tmp.path());
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
    }
}

#[test]
fn exit_codes_follow_error_class() {
    assert_eq!(CliError::Config(String::new()).exit_code(), 2);
    let io = std::io::Error::from(std::io::ErrorKind::NotFound);
    assert_eq!(CliError::io("x", io).exit_code(), 3);
    assert_eq!(CliError::Numeric(String::new()).exit_code(), 4);
}

#[test]
fn run_writes_one_directory_per_scheduler() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(ExperimentConfig, &[&str]); 3] = [
        (
            small_gaussian(),
            &[
                "trace.csv",
                "autocorrelation.csv",
                "ess.csv",
                "esjd.csv",
                "pca_trace.csv",
            ],
        ),
        (
            small_ising(1.0),
            &[
                "trace.csv",
                "error.csv",
                "recovered.pgm",
                "posterior_mean.pgm",
            ],
        ),
        (
            small_lda(),
            &[
                "trace.csv",
                "loglik.csv",
                "perplexity.csv",
                "topics.csv",
                "topic_match.csv",
            ],
        ),
    ];
    for (config, files) in cases {
        let out = tmp.path().join(config.kind.name());
        let dirs = run_experiment(&config, &out).unwrap();
        assert_eq!(dirs.len(), 3);
        for (dir, kind) in dirs.iter().zip(SchedulerKind::ALL) {
            assert_eq!(dir, &out.join(kind.name()));
            for f in files
                .iter()
                .chain(&["summary.json", "selections.csv", "config.toml"])
            {
                assert!(dir.join(f).is_file(), "{}/{f}", dir.display());
            }
            assert_eq!(
                dir.join("weights.csv").is_file(),
                kind == SchedulerKind::Weighted
            );
            let saved = ExperimentConfig::load(&dir.join("config.toml")).unwrap();
            assert_eq!(saved, config);
        }
    }
    for f in ["truth.pgm", "noisy.pgm", "noisy.f32"] {
        assert!(tmp.path().join("ising").join(f).is_file());
    }
}

#[test]
fn scheduler_subset_is_respected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_gaussian();
    c.schedulers = vec![SchedulerKind::Weighted];
    let dirs = run_experiment(&c, tmp.path()).unwrap();
    assert_eq!(dirs, vec![tmp.path().join("weighted")]);
    assert!(!tmp.path().join("random").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for config in [small_gaussian(), small_ising(0.8), small_lda()] {
        let a = tmp.path().join(format!("{}-a", config.kind.name()));
        let b = tmp.path().join(format!("{}-b", config.kind.name()));
        run_experiment(&config, &a).unwrap();
        run_experiment(&config, &b).unwrap();
        let (ta, tb) = (tree(&a), tree(&b));
        assert!(ta.len() > 10);
        assert_eq!(ta, tb, "{}", config.kind.name());
    }
}

#[test]
fn seed_changes_the_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_gaussian();
    run_experiment(&c, &tmp.path().join("a")).unwrap();
    c.chain.seed += 1;
    run_experiment(&c, &tmp.path().join("b")).unwrap();
    let trace = |d: &str| fs::read(tmp.path().join(d).join("random/trace.csv")).unwrap();
    assert_ne!(trace("a"), trace("b"));
}

#[test]
fn compare_joins_gaussian_autocorrelations() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small_gaussian();
    run_experiment(&c, tmp.path()).unwrap();
    let table = compare(&[tmp.path().to_path_buf()]).unwrap();
    assert_eq!(table.header, ["lag", "systematic", "random", "weighted"]);
    assert_eq!(table.rows.len(), 6);
    for (lag, row) in table.rows.iter().enumerate() {
        assert_eq!(row[0], lag.to_string());
    }
    assert!(table.rows[0][1..]
        .iter()
        .all(|v| v.parse::<f64>().unwrap() == 1.0));
    let csv = table.to_csv().unwrap();
    assert!(csv.starts_with("lag,systematic,random,weighted\n0,"));
}

#[test]
fn compare_tabulates_lda_perplexity() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&small_lda(), tmp.path()).unwrap();
    let dirs: Vec<PathBuf> = ["random", "weighted"]
        .iter()
        .map(|s| tmp.path().join(s))
        .collect();
    let table = compare(&dirs).unwrap();
    assert_eq!(table.header, ["iteration", "random", "weighted"]);
    let its: Vec<&str> = table.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(its, ["0", "3", "6"]);
}

#[test]
fn compare_rejects_different_experiments() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_experiment(&small_ising(1.0), &a).unwrap();
    run_experiment(&small_ising(0.5), &b).unwrap();
    let err = compare(&[a.join("random"), b.join("weighted")]).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");

    let o = wgibbs(
        &["compare", a.to_str().unwrap(), b.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);

    // Same experiment split across two output directories is fine.
    let mut only_random = small_ising(1.0);
    only_random.schedulers = vec![SchedulerKind::Random];
    run_experiment(&only_random, &tmp.path().join("c")).unwrap();
    let table = compare(&[a.join("weighted"), tmp.path().join("c/random")]).unwrap();
    assert_eq!(table.header, ["iteration", "weighted", "random"]);
}

#[test]
fn compare_needs_two_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_gaussian();
    c.schedulers = vec![SchedulerKind::Random];
    run_experiment(&c, tmp.path()).unwrap();
    assert!(matches!(
        compare(&[tmp.path().to_path_buf()]),
        Err(CliError::Config(_))
    ));
}

#[test]
fn binary_run_uses_out_root_seed_and_out() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(
        tmp.path(),
        "tiny.toml",
        "kind = \"gaussian\"\n[chain]\niterations = 20\n[gaussian]\nd = 3\nr = 1\npca_samples = 5\n",
    );
    let root = tmp.path().join("root");
    let o = wgibbs(&["run", p.to_str().unwrap(), "--seed", "9"], &root);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = root.join("tiny/weighted");
    assert_eq!(
        ExperimentConfig::load(&dir.join("config.toml"))
            .unwrap()
            .chain
            .seed,
        9
    );
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(printed.lines().count(), 3);

    let explicit = tmp.path().join("explicit");
    let o = wgibbs(
        &[
            "--out",
            explicit.to_str().unwrap(),
            "run",
            p.to_str().unwrap(),
        ],
        &root,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(explicit.join("systematic/trace.csv").is_file());

    let table = tmp.path().join("table.csv");
    let o = wgibbs(
        &[
            "compare",
            explicit.to_str().unwrap(),
            "--out",
            table.to_str().unwrap(),
        ],
        &root,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&table)
        .unwrap()
        .starts_with("lag,systematic,random,weighted"));
}

#[test]
fn validate_subcommand_reports_and_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = wgibbs(
        &[
            "validate",
            "--trials",
            "2000",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(printed.lines().count(), 3, "{printed}");
    for f in [
        "stationarity.csv",
        "optimal_weights.csv",
        "esjd.csv",
        "summary.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

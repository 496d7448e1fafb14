use std::fs;
use std::path::Path;

use msnas::cli::{run, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use msnas::config::RunConfig;
use msnas::graph::{decode_table, TABLE5};

fn tiny(dir: &Path) -> String {
    let mut cfg = RunConfig::compare();
    cfg.search.population_size = 4;
    cfg.search.tournament_size = 2;
    cfg.search.init_rounds = 3;
    cfg.search.rounds = 4;
    cfg.dataset.clips_per_class = 8;
    cfg.trainer.iterations = 4;
    let path = dir.join("tiny.toml");
    fs::write(&path, cfg.annotated_toml()).unwrap();
    path.to_string_lossy().into_owned()
}

fn msnas(args: &[&str]) -> i32 {
    run(std::iter::once("msnas").chain(args.iter().copied()))
}

#[test]
fn evolve_writes_artifacts_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(msnas(&["evolve", "--config", &cfg, "--seed", "3", "--output-dir", out.to_str().unwrap()]), EXIT_OK);
    }
    for f in ["best.arch", "best.dot", "history.csv", "checkpoint.json", "config.toml"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let csv = fs::read_to_string(a.join("history.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 4);
    assert_eq!(csv, fs::read_to_string(b.join("history.csv")).unwrap());
    assert!(decode_table(&fs::read_to_string(a.join("best.arch")).unwrap()).unwrap().validate().is_ok());
}

#[test]
fn evolve_resume_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let full = tmp.path().join("full");
    let part = tmp.path().join("part");
    assert_eq!(msnas(&["evolve", "--config", &cfg, "--output-dir", full.to_str().unwrap()]), EXIT_OK);
    assert_eq!(msnas(&["evolve", "--config", &cfg, "--stop-after", "4", "--output-dir", part.to_str().unwrap()]), EXIT_OK);
    let ckpt = part.join("checkpoint.json");
    assert_eq!(
        msnas(&["evolve", "--config", &cfg, "--resume", ckpt.to_str().unwrap(), "--output-dir", part.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(fs::read_to_string(full.join("history.csv")).unwrap(), fs::read_to_string(part.join("history.csv")).unwrap());
    assert_eq!(fs::read(full.join("checkpoint.json")).unwrap(), fs::read(part.join("checkpoint.json")).unwrap());
}

#[test]
fn compare_emits_one_curve_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = tmp.path().join("cmp");
    let code = msnas(&["compare", "--config", &cfg, "--strategies", "guided,random", "--seeds", "0,1", "--output-dir", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    let curves: std::collections::BTreeSet<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(curves.len(), 4);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("guided") && summary.contains("random") && !summary.contains("standard"));
    assert_eq!(msnas(&["compare", "--config", &cfg, "--strategies", "greedy", "--output-dir", out.to_str().unwrap()]), EXIT_VALIDATION);
}

#[test]
fn build_reports_baselines_and_rejects_bad_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(msnas(&["build", "two_stream_late_fusion", "--output-dir", out]), EXIT_OK);
    assert_eq!(msnas(&["build", "--table5", "--dot", "--save", "--output-dir", out]), EXIT_OK);
    let saved = fs::read_to_string(tmp.path().join("table5.arch")).unwrap();
    assert_eq!(decode_table(&saved).unwrap(), decode_table(TABLE5).unwrap());
    assert!(tmp.path().join("table5.dot").exists());

    let bad = tmp.path().join("bad.arch");
    fs::write(&bad, "0: 0, [RGB], 8, 1, 4\n1: 1, [2], 8, 1, 1\n2: 1, [1], 8, 1, 1\n").unwrap();
    assert_eq!(msnas(&["build", bad.to_str().unwrap(), "--output-dir", out]), EXIT_VALIDATION);
    assert_eq!(msnas(&["validate", bad.to_str().unwrap()]), EXIT_VALIDATION);
    assert_eq!(msnas(&["build", "no_such_model"]), EXIT_VALIDATION);
}

#[test]
fn train_without_iterations_only_changes_nothing_but_logits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = tmp.path().to_str().unwrap();
    assert_eq!(msnas(&["build", "two_stream_fully", "--save", "--config", &cfg, "--output-dir", out]), EXIT_OK);
    let arch = tmp.path().join("two_stream_fully.arch");
    assert_eq!(msnas(&["train", arch.to_str().unwrap(), "--config", &cfg, "--iterations", "0", "--output-dir", out]), EXIT_OK);
    let before = decode_table(&fs::read_to_string(&arch).unwrap()).unwrap();
    let after = decode_table(&fs::read_to_string(tmp.path().join("two_stream_fully.trained.arch")).unwrap()).unwrap();
    assert_eq!(before, after);

    assert_eq!(msnas(&["train", arch.to_str().unwrap(), "--config", &cfg, "--iterations", "6", "--output-dir", out]), EXIT_OK);
    let trained = decode_table(&fs::read_to_string(tmp.path().join("two_stream_fully.trained.arch")).unwrap()).unwrap();
    assert_eq!(trained.edge_keys(), before.edge_keys());
    assert!(trained.nodes().eq(before.nodes()));
    assert!(trained.edges().zip(before.edges()).any(|(a, b)| a.logit != b.logit));
}

#[test]
fn validate_checks_each_file_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = tmp.path().to_str().unwrap();
    assert_eq!(msnas(&["evolve", "--config", &cfg, "--stop-after", "2", "--save-dataset", "--output-dir", out]), EXIT_OK);
    let ckpt = tmp.path().join("checkpoint.json");
    let data = tmp.path().join("dataset.bin");
    assert_eq!(msnas(&["validate", &cfg, ckpt.to_str().unwrap(), data.to_str().unwrap()]), EXIT_OK);

    let bytes = fs::read(&data).unwrap();
    fs::write(&data, &bytes[..bytes.len() - 5]).unwrap();
    assert_eq!(msnas(&["validate", data.to_str().unwrap()]), EXIT_VALIDATION);
    let text = fs::read_to_string(&ckpt).unwrap();
    fs::write(&ckpt, &text[..text.len() / 2]).unwrap();
    assert_eq!(msnas(&["validate", ckpt.to_str().unwrap()]), EXIT_VALIDATION);
    let bad_cfg = tmp.path().join("bad.toml");
    fs::write(&bad_cfg, fs::read_to_string(&cfg).unwrap().replace("[search]", "[search]\nelitism = true")).unwrap();
    assert_eq!(msnas(&["validate", bad_cfg.to_str().unwrap()]), EXIT_VALIDATION);
}

#[test]
fn usage_errors_and_print_config() {
    assert_eq!(msnas(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(msnas(&["evolve", "--workers", "many"]), EXIT_USAGE);
    assert_eq!(msnas(&["--help"]), EXIT_OK);
    assert_eq!(msnas(&["evolve", "--preset", "compare", "--print-config"]), EXIT_OK);
    assert_eq!(msnas(&["evolve", "--preset", "enormous"]), EXIT_VALIDATION);
}

#[test]
fn shipped_configs_match_presets() {
    for name in msnas::config::PRESETS {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
        assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::preset(name).unwrap(), "{name}");
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy").join(name)
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perceptimetric"))
        .args(args)
        .current_dir(dir)
        .env_remove("PERCEPTIMETRIC_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn value(path: &Path) -> f64 {
    json(path)["value"].as_f64().unwrap()
}

#[test]
fn abx_by_subset_prints_one_row_per_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &["abx", "--deltas", p(&toy("mfcc.csv")), "--items", p(&toy("items.csv")), "--group-by", "subset"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("group_by,subset,"));
    assert!(lines[1].starts_with("subset,zerospeech,,,12,7,"));
    assert!(lines[2].starts_with("subset,worldvowels,,,12,8,"));
}

#[test]
fn missing_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["probit", "--deltas", p(&toy("mfcc.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--responses"), "{err}");
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_input_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["spearman", "--deltas", "nope.csv", "--items", p(&toy("items.csv")), "--responses", p(&toy("responses.csv")), "--out", "x.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let items = toy("items.csv");
    let responses = toy("responses.csv");
    let fr = toy("cpc_fr.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["--threads", "0", "abx", "--deltas", p(&fr), "--items", p(&items)],
        vec!["compare", "--metric", "native-effect", "--deltas-a", p(&fr), "--deltas-b", p(&fr), "--items", p(&items), "--responses", p(&responses), "--out", "c.json"],
        vec!["bootstrap", "--metric", "spearman", "--deltas", p(&fr), "--responses", p(&responses), "--out", "b.json"],
        vec!["bootstrap", "--metric", "ll", "--deltas", p(&fr), "--responses", p(&responses), "--n", "0", "--out", "b.json"],
        vec!["probit", "--deltas", p(&fr), "--responses", p(&responses), "--lambda", "-1", "--out", "l.json"],
        vec!["probit", "--deltas", p(&fr), "--responses", p(&responses), "--out", "missing/dir/l.json"],
    ];
    for args in cases {
        let out = run_in(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn data_problems_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let partial = dir.path().join("partial.csv");
    let text = fs::read_to_string(toy("mfcc.csv")).unwrap();
    fs::write(&partial, text.lines().take(20).collect::<Vec<_>>().join("\n")).unwrap();
    let out = run_in(
        dir.path(),
        &["probit", "--deltas", p(&partial), "--responses", p(&toy("responses.csv")), "--lambda", "0", "--out", "l.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "triplet_id,delta\nt01,abc\n").unwrap();
    let out = run_in(dir.path(), &["abx", "--deltas", p(&garbage), "--items", p(&toy("items.csv"))]);
    assert_eq!(out.status.code(), Some(1));
}

// Reference values computed independently (statsmodels probit, scipy rank
// and product-moment correlations) on the toy fixture.
#[test]
fn point_metrics_match_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (items, responses) = (toy("items.csv"), toy("responses.csv"));
    let (mfcc, fr, en) = (toy("mfcc.csv"), toy("cpc_fr.csv"), toy("cpc_en.csv"));

    ok(d, &["probit", "--deltas", p(&mfcc), "--responses", p(&responses), "--lambda", "0", "--out", "ll.json"]);
    assert!((value(&d.join("ll.json")) - -93.64951531556052).abs() < 1e-9);

    for (level, rho, r) in [
        ("contrast", 0.8986451052612952, 0.7569110199323484),
        ("stimulus", 0.499112807774561, 0.2587621646762491),
    ] {
        ok(d, &["spearman", "--deltas", p(&mfcc), "--items", p(&items), "--responses", p(&responses), "--level", level, "--out", "sp.json"]);
        assert!((value(&d.join("sp.json")) - rho).abs() < 1e-12, "{level}");
        ok(d, &[
            "native-effect", "--deltas-fr", p(&fr), "--deltas-en", p(&en), "--items", p(&items), "--responses",
            p(&responses), "--level", level, "--out", "ne.json",
        ]);
        assert!((value(&d.join("ne.json")) - r).abs() < 1e-12, "{level}");
    }
    let ne = json(&d.join("ne.json"));
    assert_eq!(ne["language_group"], "both");
    assert_eq!(ne["details"]["units"], 42);
}

#[test]
fn cross_validation_is_the_default_policy() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["probit", "--deltas", p(&toy("mfcc.csv")), "--responses", p(&toy("responses.csv")), "--out", "ll.json"],
    );
    let out = json(&dir.path().join("ll.json"));
    let cv = &out["details"]["cv"];
    assert_eq!(cv["folds"], 5);
    assert_eq!(cv["grid"].as_array().unwrap().len(), 5);
    assert_eq!(out["details"]["fit"]["lambda"], cv["lambda"]);
}

fn bootstrap_args<'a>(mfcc: &'a str, items: &'a str, responses: &'a str) -> Vec<&'a str> {
    vec![
        "bootstrap", "--metric", "spearman", "--deltas", mfcc, "--items", items, "--responses", responses, "--n", "300",
        "--seed", "11", "--keep-replicates", "--out", "bs.json",
    ]
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let (mfcc, items, responses) = (toy("mfcc.csv"), toy("items.csv"), toy("responses.csv"));
    let mut runs = Vec::new();
    for threads in ["1", "3", "1"] {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["--threads", threads];
        args.extend(bootstrap_args(p(&mfcc), p(&items), p(&responses)));
        ok(dir.path(), &args);
        runs.push((
            fs::read(dir.path().join("bs.json")).unwrap(),
            fs::read(dir.path().join("bs.json.manifest.json")).unwrap(),
        ));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    let out: Value = serde_json::from_slice(&runs[0].0).unwrap();
    assert_eq!(out["replicates"].as_array().unwrap().len(), 300);
    let [lo, hi] = [out["ci"][0].as_f64().unwrap(), out["ci"][1].as_f64().unwrap()];
    assert!(lo <= out["value"].as_f64().unwrap() && out["value"].as_f64().unwrap() <= hi);
}

#[test]
fn manifest_records_config_and_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let (mfcc, items, responses) = (toy("mfcc.csv"), toy("items.csv"), toy("responses.csv"));
    ok(dir.path(), &bootstrap_args(p(&mfcc), p(&items), p(&responses)));
    let m = json(&dir.path().join("bs.json.manifest.json"));
    assert_eq!(m["tool"], "perceptimetric");
    assert_eq!(m["config"]["command"], "bootstrap");
    assert_eq!(m["config"]["seed"], 11);
    assert_eq!(m["config"]["n"], 300);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
    for input in m["inputs"].as_array().unwrap() {
        assert_eq!(input["sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(m["outputs"][0]["path"], "bs.json");
    let keys: Vec<&String> = m.as_object().unwrap().keys().collect();
    assert!(keys.iter().all(|k| !k.contains("time") && !k.contains("date")), "{keys:?}");
}

#[test]
fn report_rejects_bad_input_sets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run_in(d, &["report", "--out-dir", "rep"]);
    assert_eq!(out.status.code(), Some(2));

    let (items, responses) = (toy("items.csv"), toy("responses.csv"));
    let partial = d.join("partial.csv");
    let text = fs::read_to_string(toy("mfcc.csv")).unwrap();
    fs::write(&partial, text.lines().take(21).collect::<Vec<_>>().join("\n")).unwrap();
    ok(d, &["spearman", "--deltas", p(&toy("mfcc.csv")), "--items", p(&items), "--responses", p(&responses), "--out", "a.json"]);
    ok(d, &["spearman", "--deltas", p(&partial), "--items", p(&items), "--responses", p(&responses), "--out", "b.json"]);
    let out = run_in(d, &["report", "--inputs", "a.json", "b.json", "--out-dir", "rep"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("different item sets"), "{err}");
    assert!(err.contains("(24 items): a.json") && err.contains("(20 items): b.json"), "{err}");

    let out = run_in(d, &["report", "--inputs", "a.json", "a.json", "--out-dir", "rep"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}

/// Runs the full metric pipeline on the toy fixture and compares the report
/// with the checked-in copy. Set PERCEPTIMETRIC_BLESS=1 to rewrite it.
#[test]
fn report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (items, responses) = (toy("items.csv"), toy("responses.csv"));
    let (mfcc, fr, en) = (toy("mfcc.csv"), toy("cpc_fr.csv"), toy("cpc_en.csv"));
    let (items, responses, mfcc, fr, en) = (p(&items), p(&responses), p(&mfcc), p(&fr), p(&en));
    let common = ["--items", items, "--responses", responses, "--n", "200", "--seed", "1"];
    for (deltas, out) in [(mfcc, "sp_mfcc.json"), (fr, "sp_fr.json"), (en, "sp_en.json")] {
        let mut args = vec!["bootstrap", "--metric", "spearman", "--deltas", deltas, "--out", out];
        args.extend(common);
        ok(d, &args);
    }
    for (a, b, out) in [(mfcc, fr, "cmp1.json"), (fr, en, "cmp2.json"), (mfcc, en, "cmp3.json")] {
        let mut args = vec!["compare", "--metric", "spearman", "--deltas-a", a, "--deltas-b", b, "--out", out];
        args.extend(common);
        ok(d, &args);
    }
    ok(d, &["probit", "--deltas", mfcc, "--responses", responses, "--lambda", "0", "--out", "ll_mfcc.json"]);
    ok(d, &["probit", "--deltas", fr, "--responses", responses, "--lambda", "0", "--out", "ll_fr.json"]);
    ok(d, &[
        "native-effect", "--deltas-fr", fr, "--deltas-en", en, "--items", items, "--responses", responses,
        "--level", "stimulus", "--model", "cpc", "--out", "ne.json",
    ]);
    ok(d, &["abx", "--deltas", mfcc, "--items", items, "--out", "abx_mfcc.csv"]);
    ok(d, &["abx", "--deltas", fr, "--items", items, "--out", "abx_fr.csv"]);
    ok(d, &[
        "report", "--inputs", "sp_mfcc.json", "sp_fr.json", "sp_en.json", "cmp1.json", "cmp2.json", "cmp3.json",
        "ll_mfcc.json", "ll_fr.json", "ne.json", "--abx", "mfcc=abx_mfcc.csv", "--abx", "cpc_fr=abx_fr.csv",
        "--out-dir", "rep", "--plots",
    ]);
    assert!(d.join("rep/spearman_contrast_all.svg").is_file());
    assert!(d.join("rep/report.manifest.json").is_file());

    let golden = toy("golden");
    for name in ["report.md", "report.csv"] {
        let got = fs::read_to_string(d.join("rep").join(name)).unwrap();
        if std::env::var_os("PERCEPTIMETRIC_BLESS").is_some() {
            fs::create_dir_all(&golden).unwrap();
            fs::write(golden.join(name), &got).unwrap();
        }
        assert_eq!(got, fs::read_to_string(golden.join(name)).unwrap(), "{name}");
    }
}

fn write_wav(path: &Path, rate: u32, samples: &[f32]) {
    let data: Vec<u8> = samples
        .iter()
        .flat_map(|s| ((s.clamp(-1.0, 1.0) * 32767.0) as i16).to_le_bytes())
        .collect();
    let mut b = Vec::new();
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&rate.to_le_bytes());
    b.extend_from_slice(&(rate * 2).to_le_bytes());
    b.extend_from_slice(&2u16.to_le_bytes());
    b.extend_from_slice(&16u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&(data.len() as u32).to_le_bytes());
    b.extend_from_slice(&data);
    fs::write(path, b).unwrap();
}

fn tone(rate: u32, secs: f64, freqs: &[f64]) -> Vec<f32> {
    let n = (rate as f64 * secs) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            (freqs.iter().map(|f| (2.0 * std::f64::consts::PI * f * t).sin()).sum::<f64>() * 0.3 / freqs.len() as f64)
                as f32
        })
        .collect()
}

#[test]
fn mfcc_then_delta_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let wavs = d.join("wavs");
    fs::create_dir(&wavs).unwrap();
    write_wav(&wavs.join("low_a.wav"), 16_000, &tone(16_000, 0.30, &[300.0, 900.0]));
    write_wav(&wavs.join("low_b.wav"), 16_000, &tone(16_000, 0.25, &[310.0, 880.0]));
    write_wav(&wavs.join("high.wav"), 16_000, &tone(16_000, 0.28, &[2500.0, 3400.0]));
    write_wav(&wavs.join("high_8k.WAV"), 8_000, &tone(8_000, 0.28, &[2400.0, 3300.0]));
    write_wav(&wavs.join("empty.wav"), 16_000, &[]);
    fs::write(wavs.join("notes.txt"), "not audio").unwrap();
    fs::write(
        d.join("items.csv"),
        "triplet_id,target_id,other_id,x_id,phone_target,phone_other,language,subset,target_is_A\n\
         t1,low_a,high,low_b,a,i,fr,zerospeech,true\n\
         t2,high,low_a,high_8k,i,a,fr,zerospeech,false\n\
         t3,high,low_a,low_b,i,a,fr,zerospeech,true\n",
    )
    .unwrap();

    let out = ok(d, &["mfcc", "--audio-dir", "wavs", "--out", "feats.pma"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1 of 5"));
    let manifest = json(&d.join("feats.pma.manifest.json"));
    assert_eq!(manifest["notes"]["skipped"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 5);

    ok(d, &["delta", "--features", "feats.pma", "--items", "items.csv", "--out", "deltas.csv"]);
    let text = fs::read_to_string(d.join("deltas.csv")).unwrap();
    let deltas: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(deltas.len(), 3);
    assert!(deltas[0] > 0.0 && deltas[1] > 0.0, "{deltas:?}");
    assert!(deltas[2] < 0.0, "{deltas:?}");

    let first = fs::read(d.join("feats.pma")).unwrap();
    ok(d, &["--threads", "2", "mfcc", "--audio-dir", "wavs", "--out", "feats.pma"]);
    assert_eq!(first, fs::read(d.join("feats.pma")).unwrap());

    fs::remove_file(d.join("wavs/empty.wav")).unwrap();
    let out = run_in(d, &["mfcc", "--audio-dir", "wavs", "--out", "x.pma", "--window-ms", "0"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(wavs.join("broken.wav"), b"RIFFjunk").unwrap();
    let out = run_in(d, &["mfcc", "--audio-dir", "wavs", "--out", "x.pma"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.wav"));
}

#[test]
fn abx_diff_pairs_groups() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["abx", "--deltas", p(&toy("cpc_fr.csv")), "--items", p(&toy("items.csv")), "--out", "fr.csv"]);
    ok(d, &["abx", "--deltas", p(&toy("cpc_en.csv")), "--items", p(&toy("items.csv")), "--out", "en.csv"]);
    ok(d, &["abx-diff", "--native", "fr.csv", "--nonnative", "en.csv", "--out", "diff.csv"]);
    let text = fs::read_to_string(d.join("diff.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("group_by,subset,language,contrast,native,nonnative,difference\n"));
    assert!(d.join("diff.csv.manifest.json").is_file());
}

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use perceptimetric::abx::{self, TripletItem};
use perceptimetric::featio::{self, FeatioError, FeatureArchive, MfccConfig};
use perceptimetric::stats::{
    self, native_effect, native_effect_metric, pairwise_significance, probit_fit, responses_of, spearman_metric,
    HumanResponse, LambdaPolicy, LanguageGroup, Level,
};

use crate::args::*;
use crate::artifact::{manifest_path, require_dir, require_file, require_output_parent, usage, Manifest};
use crate::metric_file::{item_set, MetricOutput, OutputKind};

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Mfcc(a) => mfcc(a, command),
        Command::Delta(a) => delta(a, command),
        Command::Abx(a) => abx_scores(a, command),
        Command::AbxDiff(a) => abx_diff(a, command),
        Command::Probit(a) => probit(a, command),
        Command::Spearman(a) => spearman(a, command),
        Command::NativeEffect(a) => native(a, command),
        Command::Bootstrap(a) => bootstrap(a, command),
        Command::Compare(a) => compare(a, command),
        Command::Report(a) => crate::report::report(a, command),
    }
}

/// Validates inputs and the output location before any computation.
fn preflight(inputs: &[&Path], out: &Path) -> Result<()> {
    inputs.iter().try_for_each(|p| require_file(p))?;
    require_output_parent(out)
}

fn finish(mut manifest: Manifest, inputs: &[&Path], out: &Path, bytes: &[u8]) -> Result<()> {
    for p in inputs {
        manifest.input(p)?;
    }
    manifest.output(out, bytes)?;
    manifest.finish(&manifest_path(out))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> abx::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn load_delta_map(path: &Path) -> Result<HashMap<String, f64>> {
    Ok(abx::delta_map(&abx::load_deltas(path)?))
}

fn model_name(name: &Option<String>, path: &Path) -> String {
    name.clone()
        .unwrap_or_else(|| path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned()))
}

fn filter_group(responses: Vec<HumanResponse>, group: GroupFilter) -> Result<Vec<HumanResponse>> {
    let rs = match group {
        GroupFilter::All => responses,
        GroupFilter::French => responses_of(&responses, LanguageGroup::French),
        GroupFilter::English => responses_of(&responses, LanguageGroup::English),
    };
    if rs.is_empty() {
        bail!("no responses from the {} listener group", group_name(group));
    }
    Ok(rs)
}

fn group_name(group: GroupFilter) -> &'static str {
    match group {
        GroupFilter::French => "french",
        GroupFilter::English => "english",
        GroupFilter::All => "all",
    }
}

fn check_replicates(n: usize) -> Result<()> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    Ok(())
}

fn policy(args: &LambdaArgs, seed: u64) -> Result<LambdaPolicy> {
    match args.lambda {
        Some(l) if l >= 0.0 && l.is_finite() => Ok(LambdaPolicy::Fixed { lambda: l }),
        Some(l) => Err(usage(format!("--lambda must be finite and >= 0, got {l}"))),
        None => {
            if args.cv_folds < 2 {
                return Err(usage("--cv-folds must be at least 2"));
            }
            Ok(LambdaPolicy::CrossValidated {
                grid: args.cv_grid.clone(),
                folds: args.cv_folds,
                seed,
            })
        }
    }
}

/// Resolves cross-validation once on the full data so replicates refit at a
/// fixed penalty.
fn resolve_lambda(responses: &[HumanResponse], deltas: &HashMap<String, f64>, policy: &LambdaPolicy) -> Result<f64> {
    Ok(probit_fit(responses, deltas, policy)?.fit.lambda)
}

fn keys(maps: &[&HashMap<String, f64>]) -> (String, usize) {
    item_set(maps.iter().flat_map(|m| m.keys().map(String::as_str)))
}

// ------------------------------------------------------------------ features

fn is_wav(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn mfcc(a: &MfccArgs, command: &Command) -> Result<()> {
    require_dir(&a.audio_dir)?;
    require_output_parent(&a.out)?;
    let config = MfccConfig {
        window_length: a.window_ms / 1000.0,
        stride: a.stride_ms / 1000.0,
        num_coefficients: a.coeffs,
        ..MfccConfig::default()
    };
    config.validate(a.sample_rate).map_err(|e| usage(e.to_string()))?;

    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.audio_dir)
        .with_context(|| format!("listing {}", a.audio_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_wav(p))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .wav files in {}", a.audio_dir.display());
    }

    let results: Vec<Result<Option<featio::FeatureMatrix>, FeatioError>> = files
        .par_iter()
        .map(|path| {
            let id = path.file_stem().unwrap_or_default().to_string_lossy();
            let audio = match featio::read_wav(path) {
                Err(FeatioError::ZeroLength(_)) => return Ok(None),
                other => other?,
            };
            let audio = if audio.sample_rate == a.sample_rate {
                audio
            } else {
                featio::resample_linear(&audio, a.sample_rate)?
            };
            match featio::compute_mfcc(&id, &audio, &config) {
                Err(FeatioError::TooShort { .. }) => Ok(None),
                other => other.map(Some),
            }
        })
        .collect();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (path, r) in files.iter().zip(results) {
        match r.with_context(|| format!("processing {}", path.display()))? {
            Some(m) => entries.push(m),
            None => {
                log::warn!("skipped {}: empty or shorter than one analysis window", path.display());
                skipped.push(path.display().to_string());
            }
        }
    }
    if !skipped.is_empty() {
        eprintln!("skipped {} of {} audio files (see manifest)", skipped.len(), files.len());
    }
    let bytes = FeatureArchive::from_entries(entries)?.to_bytes()?;
    let mut manifest = Manifest::new(command)?;
    manifest.notes = json!({ "skipped": skipped });
    let inputs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    finish(manifest, &inputs, &a.out, &bytes)
}

fn delta(a: &DeltaArgs, command: &Command) -> Result<()> {
    let inputs = [a.features.as_path(), a.items.as_path()];
    preflight(&inputs, &a.out)?;
    let archive = featio::read_archive(&a.features)?;
    let items = abx::load_items(&a.items)?;
    let records = abx::evaluate_deltas(&archive, &items)?;
    let bytes = csv_bytes(|w| abx::write_deltas(w, &records))?;
    finish(Manifest::new(command)?, &inputs, &a.out, &bytes)
}

// ------------------------------------------------------------------ ABX

fn abx_scores(a: &AbxArgs, command: &Command) -> Result<()> {
    let inputs = [a.deltas.as_path(), a.items.as_path()];
    inputs.iter().try_for_each(|p| require_file(p))?;
    if let Some(out) = &a.out {
        require_output_parent(out)?;
    }
    let deltas = abx::load_deltas(&a.deltas)?;
    let items = abx::load_items(&a.items)?;
    let scores = abx::abx_scores(&deltas, &items, a.group_by.into())?;
    let bytes = csv_bytes(|w| abx::write_scores(w, &scores))?;
    match &a.out {
        Some(out) => finish(Manifest::new(command)?, &inputs, out, &bytes),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

fn read_score_file(path: &Path) -> Result<Vec<abx::ContrastScore>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    abx::read_scores(file).with_context(|| format!("reading {}", path.display()))
}

fn abx_diff(a: &AbxDiffArgs, command: &Command) -> Result<()> {
    let inputs = [a.native.as_path(), a.nonnative.as_path()];
    preflight(&inputs, &a.out)?;
    let diffs = abx::native_nonnative_abx_diff(&read_score_file(&a.native)?, &read_score_file(&a.nonnative)?)?;
    let bytes = csv_bytes(|w| abx::write_score_differences(w, &diffs))?;
    finish(Manifest::new(command)?, &inputs, &a.out, &bytes)
}

// ------------------------------------------------------------------ metrics

struct Draft {
    metric: MetricKind,
    level: Option<Level>,
    language_group: String,
    model: String,
    seed: u64,
    item_set: (String, usize),
}

impl Draft {
    fn point(self, value: f64, command: &Command, details: impl Serialize) -> Result<MetricOutput> {
        Ok(MetricOutput {
            kind: OutputKind::Metric,
            metric: self.metric,
            level: self.level,
            language_group: self.language_group,
            model: self.model,
            model_b: None,
            value,
            ci: None,
            significant: None,
            n_replicates: 0,
            missing: 0,
            seed: self.seed,
            item_set: self.item_set.0,
            n_items: self.item_set.1,
            config: serde_json::to_value(command)?,
            details: serde_json::to_value(details)?,
            replicates: None,
        })
    }
}

fn write_metric(output: &MetricOutput, inputs: &[&Path], out: &Path, command: &Command) -> Result<()> {
    finish(Manifest::new(command)?, inputs, out, &output.to_json()?)
}

fn probit(a: &ProbitArgs, command: &Command) -> Result<()> {
    let inputs = [a.deltas.as_path(), a.responses.as_path()];
    preflight(&inputs, &a.out)?;
    let policy = policy(&a.lambda, a.seed)?;
    let deltas = load_delta_map(&a.deltas)?;
    let responses = filter_group(stats::load_responses(&a.responses)?, a.language_group)?;
    let outcome = probit_fit(&responses, &deltas, &policy)?;
    let draft = Draft {
        metric: MetricKind::Ll,
        level: None,
        language_group: group_name(a.language_group).into(),
        model: model_name(&a.model, &a.deltas),
        seed: a.seed,
        item_set: keys(&[&deltas]),
    };
    let output = draft.point(outcome.fit.log_likelihood, command, &outcome)?;
    write_metric(&output, &inputs, &a.out, command)
}

fn spearman(a: &SpearmanArgs, command: &Command) -> Result<()> {
    let inputs = [a.deltas.as_path(), a.items.as_path(), a.responses.as_path()];
    preflight(&inputs, &a.out)?;
    let deltas = load_delta_map(&a.deltas)?;
    let items = abx::load_items(&a.items)?;
    let responses = filter_group(stats::load_responses(&a.responses)?, a.language_group)?;
    let level: Level = a.level.into();
    let paired = stats::aggregate(level, &deltas, &items, &responses)?;
    let rho = stats::spearman(&paired.model, &paired.human)?;
    let draft = Draft {
        metric: MetricKind::Spearman,
        level: Some(level),
        language_group: group_name(a.language_group).into(),
        model: model_name(&a.model, &a.deltas),
        seed: 0,
        item_set: keys(&[&deltas]),
    };
    let output = draft.point(rho, command, json!({ "units": paired.len(), "dropped": paired.dropped }))?;
    write_metric(&output, &inputs, &a.out, command)
}

fn native(a: &NativeEffectArgs, command: &Command) -> Result<()> {
    let inputs = [a.deltas_fr.as_path(), a.deltas_en.as_path(), a.items.as_path(), a.responses.as_path()];
    preflight(&inputs, &a.out)?;
    let fr_model = load_delta_map(&a.deltas_fr)?;
    let en_model = load_delta_map(&a.deltas_en)?;
    let items = abx::load_items(&a.items)?;
    let responses = stats::load_responses(&a.responses)?;
    let level: Level = a.level.into();
    let effect = native_effect(
        level,
        &items,
        &fr_model,
        &en_model,
        &responses_of(&responses, LanguageGroup::French),
        &responses_of(&responses, LanguageGroup::English),
    )?;
    let draft = Draft {
        metric: MetricKind::NativeEffect,
        level: Some(level),
        language_group: "both".into(),
        model: model_name(&a.model, &a.deltas_fr),
        seed: 0,
        item_set: keys(&[&fr_model, &en_model]),
    };
    let output = draft.point(effect.r, command, json!({ "units": effect.units.len() }))?;
    write_metric(&output, &inputs, &a.out, command)
}

// ------------------------------------------------------------------ bootstrap

fn bootstrap(a: &BootstrapArgs, command: &Command) -> Result<()> {
    check_replicates(a.n)?;
    let responses_path = a.responses.as_path();
    let mut inputs: Vec<&Path> = vec![responses_path];
    inputs.extend([&a.deltas, &a.deltas_fr, &a.deltas_en, &a.items].into_iter().flatten().map(PathBuf::as_path));
    preflight(&inputs, &a.out)?;
    let level: Level = a.level.into();
    let all = stats::load_responses(responses_path)?;
    let items: Vec<TripletItem> = match &a.items {
        Some(p) => abx::load_items(p)?,
        None => Vec::new(),
    };

    let (report, draft, details) = match a.metric {
        MetricKind::Ll | MetricKind::Spearman => {
            let path = a.deltas.as_ref().expect("required by clap");
            let deltas = load_delta_map(path)?;
            let responses = filter_group(all, a.language_group)?;
            let draft = Draft {
                metric: a.metric,
                level: (a.metric == MetricKind::Spearman).then_some(level),
                language_group: group_name(a.language_group).into(),
                model: model_name(&a.model, path),
                seed: a.seed,
                item_set: keys(&[&deltas]),
            };
            if a.metric == MetricKind::Ll {
                let lambda = resolve_lambda(&responses, &deltas, &policy(&a.lambda, a.seed)?)?;
                let fixed = LambdaPolicy::Fixed { lambda };
                let metric = |rs: &[HumanResponse]| stats::ll_metric(rs, &deltas, &fixed);
                (stats::bootstrap("ll", metric, &responses, a.n, a.seed)?, draft, json!({ "lambda": lambda }))
            } else {
                let metric = |rs: &[HumanResponse]| spearman_metric(level, &items, &deltas, rs);
                (stats::bootstrap("spearman", metric, &responses, a.n, a.seed)?, draft, serde_json::Value::Null)
            }
        }
        MetricKind::NativeEffect => {
            let (fr_path, en_path) = (a.deltas_fr.as_ref().unwrap(), a.deltas_en.as_ref().unwrap());
            let fr_model = load_delta_map(fr_path)?;
            let en_model = load_delta_map(en_path)?;
            let draft = Draft {
                metric: a.metric,
                level: Some(level),
                language_group: "both".into(),
                model: model_name(&a.model, fr_path),
                seed: a.seed,
                item_set: keys(&[&fr_model, &en_model]),
            };
            let metric = |rs: &[HumanResponse]| native_effect_metric(level, &items, &fr_model, &en_model, rs);
            (stats::bootstrap("native_effect", metric, &all, a.n, a.seed)?, draft, serde_json::Value::Null)
        }
    };
    let mut output = draft.point(report.point_estimate, command, details)?;
    output.ci = Some([report.ci_low, report.ci_high]);
    output.n_replicates = report.bootstrap_values.len();
    output.missing = report.missing;
    if a.keep_replicates {
        output.replicates = Some(report.bootstrap_values);
    }
    write_metric(&output, &inputs, &a.out, command)
}

fn compare(a: &CompareArgs, command: &Command) -> Result<()> {
    check_replicates(a.n)?;
    let want = if a.metric == MetricKind::NativeEffect { 2 } else { 1 };
    for (flag, v) in [("--deltas-a", &a.deltas_a), ("--deltas-b", &a.deltas_b)] {
        if v.len() != want {
            return Err(usage(format!("{flag} takes {want} file(s) for --metric {}", a.metric.as_str())));
        }
    }
    let mut inputs: Vec<&Path> = vec![a.responses.as_path()];
    inputs.extend(a.deltas_a.iter().chain(&a.deltas_b).map(PathBuf::as_path));
    inputs.extend(a.items.iter().map(PathBuf::as_path));
    preflight(&inputs, &a.out)?;

    let level: Level = a.level.into();
    let all = stats::load_responses(&a.responses)?;
    let items: Vec<TripletItem> = match &a.items {
        Some(p) => abx::load_items(p)?,
        None => Vec::new(),
    };
    let load = |paths: &[PathBuf]| paths.iter().map(|p| load_delta_map(p)).collect::<Result<Vec<_>>>();
    let (da, db) = (load(&a.deltas_a)?, load(&a.deltas_b)?);
    let maps: Vec<&HashMap<String, f64>> = da.iter().chain(&db).collect();

    let (result, language_group, details) = match a.metric {
        MetricKind::Ll => {
            let responses = filter_group(all, a.language_group)?;
            let policy = policy(&a.lambda, a.seed)?;
            let la = resolve_lambda(&responses, &da[0], &policy)?;
            let lb = resolve_lambda(&responses, &db[0], &policy)?;
            let metric = |rs: &[HumanResponse], m: &(&HashMap<String, f64>, f64)| {
                stats::ll_metric(rs, m.0, &LambdaPolicy::Fixed { lambda: m.1 })
            };
            let r = pairwise_significance(metric, &responses, &(&da[0], la), &(&db[0], lb), a.n, a.seed)?;
            (r, group_name(a.language_group), json!({ "lambda_a": la, "lambda_b": lb }))
        }
        MetricKind::Spearman => {
            let responses = filter_group(all, a.language_group)?;
            let metric = |rs: &[HumanResponse], d: &HashMap<String, f64>| spearman_metric(level, &items, d, rs);
            let r = pairwise_significance(metric, &responses, &da[0], &db[0], a.n, a.seed)?;
            (r, group_name(a.language_group), serde_json::Value::Null)
        }
        MetricKind::NativeEffect => {
            let metric = |rs: &[HumanResponse], m: &[HashMap<String, f64>]| {
                native_effect_metric(level, &items, &m[0], &m[1], rs)
            };
            let r = pairwise_significance(metric, &all, da.as_slice(), db.as_slice(), a.n, a.seed)?;
            (r, "both", serde_json::Value::Null)
        }
    };
    let (hash, n_items) = keys(&maps);
    let output = MetricOutput {
        kind: OutputKind::Pairwise,
        metric: a.metric,
        level: (a.metric != MetricKind::Ll).then_some(level),
        language_group: language_group.into(),
        model: model_name(&a.model_a, &a.deltas_a[0]),
        model_b: Some(model_name(&a.model_b, &a.deltas_b[0])),
        value: result.difference,
        ci: Some([result.ci_low, result.ci_high]),
        significant: Some(result.significant),
        n_replicates: result.bootstrap_values.len(),
        missing: result.missing,
        seed: a.seed,
        item_set: hash,
        n_items,
        config: serde_json::to_value(command)?,
        details,
        replicates: None,
    };
    write_metric(&output, &inputs, &a.out, command)
}

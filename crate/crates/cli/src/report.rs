//! Tables (and optional plots) assembled from metric output files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};

use perceptimetric::abx;
use perceptimetric::stats::Level;

use crate::args::{Command, MetricKind, ReportArgs};
use crate::artifact::{require_file, usage, Manifest};
use crate::metric_file::{MetricOutput, OutputKind};

const GROUP_ORDER: [&str; 4] = ["french", "english", "all", "both"];

fn group_rank(g: &str) -> usize {
    GROUP_ORDER.iter().position(|x| *x == g).unwrap_or(GROUP_ORDER.len())
}

fn metric_title(metric: MetricKind) -> &'static str {
    match metric {
        MetricKind::Ll => "Log-likelihood",
        MetricKind::Spearman => "Spearman correlation",
        MetricKind::NativeEffect => "Native-language effect",
    }
}

fn level_name(level: Option<Level>) -> &'static str {
    match level {
        None => "",
        Some(Level::Contrast) => "contrast",
        Some(Level::Stimulus) => "stimulus",
    }
}

/// One table: a metric at a level for one listener group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TableKey {
    metric: MetricKind,
    level: u8,
    group: (usize, String),
}

impl TableKey {
    fn of(o: &MetricOutput) -> Self {
        TableKey {
            metric: o.metric,
            level: match o.level {
                None => 0,
                Some(Level::Contrast) => 1,
                Some(Level::Stimulus) => 2,
            },
            group: (group_rank(&o.language_group), o.language_group.clone()),
        }
    }

    fn level(&self) -> Option<Level> {
        match self.level {
            1 => Some(Level::Contrast),
            2 => Some(Level::Stimulus),
            _ => None,
        }
    }

    fn heading(&self) -> String {
        let mut h = metric_title(self.metric).to_string();
        if let Some(l) = self.level() {
            write!(h, ", {} level", level_name(Some(l))).unwrap();
        }
        write!(h, " ({} listeners)", self.group.1).unwrap();
        h
    }

    fn stem(&self) -> String {
        match self.level() {
            Some(l) => format!("{}_{}_{}", self.metric.as_str(), level_name(Some(l)), self.group.1),
            None => format!("{}_{}", self.metric.as_str(), self.group.1),
        }
    }
}

#[derive(Default)]
struct Table {
    rows: BTreeMap<String, MetricOutput>,
    /// (better, worse) from significant pairwise comparisons.
    edges: BTreeSet<(String, String)>,
}

impl Table {
    /// Models each row is significantly better than, omitting edges implied
    /// by two others (A>B and B>C make A>C redundant).
    fn better_than(&self, model: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(a, _)| a == model)
            .filter(|(a, c)| {
                !self
                    .edges
                    .iter()
                    .any(|(x, b)| x == a && b != c && self.edges.contains(&(b.clone(), c.clone())))
            })
            .map(|(_, c)| c.clone())
            .collect()
    }
}

fn fmt_ci(ci: Option<[f64; 2]>) -> String {
    ci.map_or_else(|| "–".into(), |[lo, hi]| format!("[{lo:.4}, {hi:.4}]"))
}

fn parse_abx_arg(s: &str) -> Result<(String, PathBuf)> {
    match s.split_once('=') {
        Some((m, p)) if !m.is_empty() && !p.is_empty() => Ok((m.to_string(), PathBuf::from(p))),
        _ => Err(usage(format!("--abx expects MODEL=scores.csv, got {s:?}"))),
    }
}

fn check_item_sets(files: &[(PathBuf, MetricOutput)]) -> Result<()> {
    let mut sets: BTreeMap<(&str, usize), Vec<String>> = BTreeMap::new();
    for (p, o) in files {
        sets.entry((&o.item_set, o.n_items)).or_default().push(p.display().to_string());
    }
    if sets.len() > 1 {
        let mut msg = String::from("metric files were computed on different item sets:");
        for ((hash, n), paths) in &sets {
            write!(msg, "\n  {} ({} items): {}", &hash[..12.min(hash.len())], n, paths.join(", ")).unwrap();
        }
        bail!(msg);
    }
    Ok(())
}

pub fn report(a: &ReportArgs, command: &Command) -> Result<()> {
    let abx_args = a.abx.iter().map(|s| parse_abx_arg(s)).collect::<Result<Vec<_>>>()?;
    a.inputs.iter().chain(abx_args.iter().map(|(_, p)| p)).try_for_each(|p| require_file(p))?;
    if !a.out_dir.is_dir() {
        std::fs::create_dir_all(&a.out_dir).map_err(|e| usage(format!("cannot create {}: {e}", a.out_dir.display())))?;
    }

    let files = a
        .inputs
        .iter()
        .map(|p| Ok((p.clone(), MetricOutput::load(p)?)))
        .collect::<Result<Vec<_>>>()?;
    check_item_sets(&files)?;

    let mut tables: BTreeMap<TableKey, Table> = BTreeMap::new();
    for (path, o) in &files {
        let table = tables.entry(TableKey::of(o)).or_default();
        match o.kind {
            OutputKind::Metric => {
                if table.rows.insert(o.model.clone(), o.clone()).is_some() {
                    bail!(
                        "{}: duplicate {} result for model {} ({} listeners)",
                        path.display(),
                        o.metric.as_str(),
                        o.model,
                        o.language_group
                    );
                }
            }
            OutputKind::Pairwise => {
                let b = o.model_b.clone().unwrap_or_default();
                if o.significant == Some(true) {
                    if o.value > 0.0 {
                        table.edges.insert((o.model.clone(), b));
                    } else if o.value < 0.0 {
                        table.edges.insert((b, o.model.clone()));
                    }
                }
            }
        }
    }

    let mut abx_tables = Vec::new();
    for (model, path) in &abx_args {
        let f = std::fs::File::open(path)?;
        abx_tables.push((model.clone(), abx::read_scores(f)?));
    }

    let mut md = String::from("# Model–human comparison\n");
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "metric", "level", "language_group", "group", "model", "value", "ci_low", "ci_high", "n_replicates", "missing",
        "better_than",
    ])?;
    let mut plots = Vec::new();
    for (key, table) in &tables {
        if table.rows.is_empty() {
            continue;
        }
        write!(md, "\n## {}\n\n| model | value | 95% CI | better than |\n|---|---:|---|---|\n", key.heading())?;
        for (model, o) in &table.rows {
            let better = table.better_than(model);
            writeln!(md, "| {} | {:.4} | {} | {} |", model, o.value, fmt_ci(o.ci), better.join(", "))?;
            let (lo, hi) = o.ci.map_or((String::new(), String::new()), |[l, h]| (l.to_string(), h.to_string()));
            csv.write_record([
                o.metric.as_str(),
                level_name(o.level),
                &o.language_group,
                "",
                model,
                &o.value.to_string(),
                &lo,
                &hi,
                &o.n_replicates.to_string(),
                &o.missing.to_string(),
                &better.join(";"),
            ])?;
        }
        if a.plots {
            plots.push((key.stem(), bar_chart(&key.heading(), table.rows.values())));
        }
    }

    if !abx_tables.is_empty() {
        let groups: BTreeSet<&abx::GroupKey> = abx_tables.iter().flat_map(|(_, s)| s.iter().map(|c| &c.group)).collect();
        let models: Vec<&str> = abx_tables.iter().map(|(m, _)| m.as_str()).collect();
        write!(md, "\n## ABX accuracy\n\n| group | {} |\n|---|{}\n", models.join(" | "), "---:|".repeat(models.len()))?;
        for g in &groups {
            let mut line = format!("| {g} |");
            for (model, scores) in &abx_tables {
                match scores.iter().find(|s| &s.group == *g) {
                    Some(s) => {
                        write!(line, " {:.3} |", s.abx_accuracy)?;
                        csv.write_record([
                            "abx",
                            "",
                            "",
                            &g.to_string(),
                            model,
                            &s.abx_accuracy.to_string(),
                            "",
                            "",
                            "",
                            "",
                            "",
                        ])?;
                    }
                    None => line.push_str(" – |"),
                }
            }
            md.push_str(&line);
            md.push('\n');
        }
    }

    let mut manifest = Manifest::new(command)?;
    for p in a.inputs.iter().chain(abx_args.iter().map(|(_, p)| p)) {
        manifest.input(p)?;
    }
    manifest.output(&a.out_dir.join("report.md"), md.as_bytes())?;
    manifest.output(&a.out_dir.join("report.csv"), &csv.into_inner()?)?;
    for (stem, svg) in &plots {
        manifest.output(&a.out_dir.join(format!("{stem}.svg")), svg.as_bytes())?;
    }
    manifest.finish(&a.out_dir.join("report.manifest.json"))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bars with interval whiskers; deterministic output.
fn bar_chart<'a>(title: &str, rows: impl Iterator<Item = &'a MetricOutput>) -> String {
    let rows: Vec<&MetricOutput> = rows.collect();
    let (label_w, plot_w, row_h, top) = (160.0, 400.0, 28.0, 40.0);
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for o in &rows {
        let [a, b] = o.ci.unwrap_or([o.value, o.value]);
        lo = lo.min(a).min(o.value);
        hi = hi.max(b).max(o.value);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let x = |v: f64| label_w + (v - lo) / (hi - lo) * plot_w;
    let height = top + row_h * rows.len() as f64 + 20.0;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"10\" y=\"20\" font-size=\"14\">{t}</text>\n\
         <line x1=\"{z:.2}\" y1=\"{top}\" x2=\"{z:.2}\" y2=\"{b}\" stroke=\"#000\"/>\n",
        w = label_w + plot_w + 20.0,
        t = escape(title),
        z = x(0.0),
        b = height - 20.0,
    );
    for (i, o) in rows.iter().enumerate() {
        let y = top + row_h * i as f64;
        let (x0, x1) = (x(0.0).min(x(o.value)), x(0.0).max(x(o.value)));
        writeln!(s, "<text x=\"10\" y=\"{:.2}\">{}</text>", y + 17.0, escape(&o.model)).unwrap();
        writeln!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4c72b0\"/>",
            y + 4.0,
            x1 - x0,
            row_h - 8.0
        )
        .unwrap();
        if let Some([a, b]) = o.ci {
            let cy = y + row_h / 2.0;
            writeln!(s, "<line x1=\"{:.2}\" y1=\"{cy:.2}\" x2=\"{:.2}\" y2=\"{cy:.2}\" stroke=\"#222\"/>", x(a), x(b))
                .unwrap();
            for v in [a, b] {
                writeln!(
                    s,
                    "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"#222\"/>",
                    x(v),
                    cy - 5.0,
                    cy + 5.0
                )
                .unwrap();
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

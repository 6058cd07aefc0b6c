use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use corrector_core::bounds::{bound_curve, log_spaced_counts, psi, rho};
use corrector_core::corrector::fit as fit_model;
use corrector_core::metrics::compare_with_baseline;
use corrector_core::sim::{generate, validate_bounds, SyntheticSpec};
use corrector_core::{CorrectorModel, Outcome};

use crate::config::{self, FileConfig, FitFlags, LabelValues};
use crate::dataset::{self, Dataset, Format};
use crate::{ApplyArgs, BoundsArgs, CurveArgs, DataFormat, EvaluateArgs, FitArgs, SimulateArgs};

pub const DECISION_COLUMNS: [&str; 6] =
    ["id", "predicted", "decision", "score", "threshold", "gamma"];
pub const REJECT: &str = "REJECT";
pub const CURVE_COLUMNS: [&str; 3] = ["delta", "m", "gamma"];

fn format_of(f: &DataFormat) -> Result<Format> {
    if !f.delimiter.is_ascii() {
        bail!("delimiter must be a single ASCII character");
    }
    Ok(Format {
        delimiter: f.delimiter as u8,
        feature_prefix: f.feature_prefix.clone(),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
fn timestamp() -> Option<u64> {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        return v.trim().parse().ok();
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs())
}

fn load_model(path: &Path) -> Result<CorrectorModel> {
    CorrectorModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn check_dimension(model: &CorrectorModel, data: &Dataset) -> Result<()> {
    if let Some(s) = data.samples.first() {
        if s.features.len() != model.feature_dim() {
            bail!(
                "data has {} feature columns, model expects {}",
                s.features.len(),
                model.feature_dim()
            );
        }
    }
    Ok(())
}

/// Accepted and rejected counts per class.
fn decision_counts(model: &CorrectorModel, data: &Dataset) -> Result<Vec<(usize, usize)>> {
    let mut counts = vec![(0, 0); model.label_set.len()];
    for s in &data.samples {
        let j = model
            .label_set
            .iter()
            .position(|l| *l == s.predicted)
            .expect("labels checked");
        let d = model
            .decide(&s.predicted, &s.features)
            .with_context(|| format!("row {}", s.id))?;
        if d.is_reject() {
            counts[j].1 += 1;
        } else {
            counts[j].0 += 1;
        }
    }
    Ok(counts)
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let data = dataset::read(&args.data, &format_of(&args.format)?)?;
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let parse = |v: &Option<String>, what: &str| -> Result<Option<LabelValues>> {
        v.as_deref()
            .map(|t| LabelValues::parse(t).with_context(|| format!("--{what}")))
            .transpose()
    };
    let flags = FitFlags {
        labels: args
            .labels
            .as_deref()
            .map(dataset::parse_label_list)
            .transpose()?,
        deltas: parse(&args.deltas, "deltas")?,
        gamma_targets: parse(&args.gamma_targets, "gamma-targets")?,
        pca_variance: args.pca_variance,
        pca_k: args.pca_k,
        split: args.split,
        seed: args.seed,
        ridge: args.ridge,
    };
    let labels = config::resolve_labels(&flags, &file, data.declared_labels.as_ref())?;
    let fit_config = config::resolve_fit_config(&flags, &file, &labels)?;
    if data.samples.is_empty() {
        bail!("{} has no data rows", args.data.display());
    }
    dataset::check_labels(&data.samples, &labels)?;

    let mut model = fit_model(&data.samples, &labels, &fit_config)?;
    model.provenance.created_unix = timestamp();
    model.provenance.generator = concat!("corrector ", env!("CARGO_PKG_VERSION")).to_string();
    model
        .save(&args.model)
        .with_context(|| format!("writing {}", args.model.display()))?;

    let counts = decision_counts(&model, &data)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<12} {:>12} {:>18} {:>8} {:>8} {:>12} {:>12}",
        "class", "delta", "theta", "m_plus", "m_minus", "gamma", "upsilon"
    )?;
    for c in &model.per_class {
        writeln!(
            out,
            "{:<12} {:>12.10} {:>18.10} {:>8} {:>8} {:>12.10} {:>12.10}",
            c.class_label,
            c.delta,
            c.threshold,
            c.m_plus,
            c.m_minus,
            c.bounds.gamma,
            c.bounds.upsilon
        )?;
    }
    writeln!(out, "\nresubstitution on {}:", args.data.display())?;
    writeln!(out, "{:<12} {:>10} {:>10}", "class", "accepted", "rejected")?;
    for (l, (a, r)) in model.label_set.iter().zip(&counts) {
        writeln!(out, "{l:<12} {a:>10} {r:>10}")?;
    }
    writeln!(out, "\nmodel written to {}", args.model.display())?;
    Ok(())
}

pub fn apply(args: &ApplyArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = dataset::read(&args.data, &format_of(&args.format)?)?;
    check_dimension(&model, &data)?;
    dataset::check_labels(&data.samples, &model.label_set)?;
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(DECISION_COLUMNS)?;
    for s in &data.samples {
        let d = model
            .decide(&s.predicted, &s.features)
            .with_context(|| format!("row {}", s.id))?;
        let decision = match &d.outcome {
            Outcome::Accept(l) => l.as_str(),
            Outcome::Reject => REJECT,
        };
        w.write_record([
            s.id.as_str(),
            s.predicted.as_str(),
            decision,
            &d.score.to_string(),
            &d.threshold.to_string(),
            &d.class_bounds.gamma.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = dataset::read(&args.data, &format_of(&args.format)?)?;
    if !data.has_truth {
        bail!(
            "{} has no {} column",
            args.data.display(),
            dataset::TRUTH_COLUMN
        );
    }
    check_dimension(&model, &data)?;
    dataset::check_labels(&data.samples, &model.label_set)?;
    let comparison = compare_with_baseline(&model, &data.samples)?;
    write!(io::stdout().lock(), "{}", comparison.render_table())?;
    if let Some(path) = &args.out {
        let mut text = serde_json::to_string_pretty(&comparison.evaluation)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn bounds(args: &BoundsArgs) -> Result<()> {
    let gamma = rho(args.delta, args.m_minus)?;
    let mut out = io::stdout().lock();
    writeln!(out, "gamma = {gamma}")?;
    writeln!(out, "1-gamma = {}", 1.0 - gamma)?;
    if let (Some(f), Some(m)) = (args.f_plus, args.m_plus) {
        let raw = 1.0 - psi(f, m)?;
        writeln!(out, "upsilon = {}", raw.max(0.0))?;
        writeln!(out, "upsilon_raw = {raw}")?;
    }
    Ok(())
}

pub fn curve(args: &CurveArgs) -> Result<()> {
    let deltas = match LabelValues::parse(&args.deltas).context("--deltas")? {
        LabelValues::One(d) => vec![d],
        LabelValues::List(v) => v,
        LabelValues::Map(_) => bail!("--deltas takes plain numbers"),
    };
    let ms = log_spaced_counts(args.m_min, args.m_max, args.points)?;
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(CURVE_COLUMNS)?;
    for d in deltas {
        for p in bound_curve(d, &ms)? {
            w.write_record([p.delta.to_string(), p.m.to_string(), p.gamma.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut spec: SyntheticSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if args.emit_fit.is_some() || args.emit_test.is_some() {
        let (fit_set, test) = generate(&spec)?;
        for (path, samples) in [(&args.emit_fit, &fit_set), (&args.emit_test, &test)] {
            if let Some(p) = path {
                dataset::write(p, samples, &spec.labels())?;
            }
        }
    }
    let report = validate_bounds(&spec)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>6} {:>8} {:>8} {:>8} {:>6}",
        "class",
        "delta",
        "m_minus",
        "gamma",
        "reject",
        "tol",
        "ok",
        "upsilon",
        "accept",
        "tol",
        "ok"
    )?;
    for c in &report.classes {
        writeln!(
            out,
            "{:<10} {:>6.3} {:>8} {:>8.4} {:>8.4} {:>8.4} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>6}",
            c.label,
            c.delta,
            c.m_minus,
            c.gamma,
            c.reject_rate.mean,
            c.reject_tolerance,
            c.reject_pass,
            c.upsilon_mean,
            c.accept_rate.mean,
            c.accept_tolerance,
            c.accept_pass
        )?;
    }
    for f in &report.failed_trials {
        writeln!(out, "trial {} failed: {}", f.trial, f.error)?;
    }
    writeln!(
        out,
        "\n{} trials, seed {}: {}",
        report.trials,
        report.seed,
        if report.pass { "PASS" } else { "FAIL" }
    )?;
    if let Some(path) = &args.out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

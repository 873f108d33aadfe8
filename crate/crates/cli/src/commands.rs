use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use upflip::evaluation::{
    self, mauuc, repeated_holdout, stratified_cv_auroc, Correction, CvConfig, HoldoutConfig, UpliftCurve,
};
use upflip::rct_data::{
    self, generate_classification, generate_synthetic, ClassificationSpec, LabeledData, Schema, SyntheticSpec,
};
use upflip::rebalance::compute_flip_factor;
use upflip::rng::derive_seed;
use upflip::{LearnerConfig, Metamodel, RctDataset};

use crate::config::Config;
use crate::svg::{self, Series};
use crate::{CliError, Common};

type Flags<'a> = &'a [Option<(&'static str, String)>];

const SYNTHETIC_KEYS: [(&str, &str); 6] = [
    ("p", "5"),
    ("control_intercept", "-4.6"),
    ("control_coef", "0.5"),
    ("uplift_intercept", "0"),
    ("uplift_coef", "0.5"),
    ("treatment_share", "0.5"),
];

/// Defaults, then the config file, then flags, then `--set` pairs.
fn settings(defaults: &[(&str, &str)], common: &Common, flags: Flags) -> Result<Config, CliError> {
    let mut cfg = Config::from_defaults(defaults);
    if let Some(p) = &common.config {
        cfg.merge(&Config::load(p)?)?;
    }
    for (k, v) in flags.iter().flatten() {
        cfg.set(k, v)?;
    }
    if let Some(s) = common.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(o) = &common.out {
        cfg.set("out", &o.display().to_string())?;
    }
    for pair in &common.set {
        cfg.set_pair(pair)?;
    }
    Ok(cfg)
}

fn with_synthetic(keys: &[(&'static str, &'static str)]) -> Vec<(&'static str, &'static str)> {
    keys.iter().chain(SYNTHETIC_KEYS.iter()).copied().collect()
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn experiment_err(e: impl std::fmt::Display) -> CliError {
    CliError::Experiment(e.to_string())
}

/// Writes through a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("part");
    fs::write(&tmp, contents)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn synthetic_spec(cfg: &Config, seed: u64) -> Result<SyntheticSpec, CliError> {
    let p: usize = cfg.get("p")?;
    let mut beta_control = vec![cfg.get("control_intercept")?];
    beta_control.extend(std::iter::repeat_n(cfg.get::<f64>("control_coef")?, p));
    let mut beta_uplift = vec![cfg.get("uplift_intercept")?];
    beta_uplift.extend(std::iter::repeat_n(cfg.get::<f64>("uplift_coef")?, p));
    let spec = SyntheticSpec {
        p,
        beta_control,
        beta_uplift,
        treatment_share: cfg.get("treatment_share")?,
        seed,
    };
    spec.validate().map_err(input_err)?;
    Ok(spec)
}

fn print_summary(dataset: &RctDataset) -> Result<(), CliError> {
    let s = rct_data::summarize(dataset).map_err(input_err)?;
    let (plan, recovery) = compute_flip_factor(&s);
    println!("n = {}", s.n);
    println!("p = {}", s.p);
    println!("share_treatment = {:?}", s.share_treatment);
    println!("share_control = {:?}", s.share_control);
    println!("rate_treatment = {:?}", s.rate_treatment);
    println!("rate_control = {:?}", s.rate_control);
    println!("overall_rate = {:?}", s.overall_rate());
    println!("majority_treatment = {}", s.majority_treatment);
    println!("majority_control = {}", s.majority_control);
    println!("flip_factor = {:?}", plan.k());
    println!("flip_mode = {:?}", plan.mode);
    println!("recovery_scale = {:?}", recovery.scale);
    println!("recovery_offset = {:?}", recovery.offset);
    Ok(())
}

pub fn generate(common: &Common, flags: Flags) -> Result<(), CliError> {
    let defaults = with_synthetic(&[("n", "1000"), ("seed", "0"), ("out", "synthetic.csv"), ("tau_out", "")]);
    let cfg = settings(&defaults, common, flags)?;
    if common.show_config {
        print!("{cfg}");
        return Ok(());
    }
    let seed: u64 = cfg.get("seed")?;
    let spec = synthetic_spec(&cfg, seed)?;
    let (dataset, tau) = generate_synthetic(&spec, cfg.get("n")?, seed).map_err(input_err)?;
    let out = PathBuf::from(cfg.raw("out"));
    let tau_out = match cfg.optional("tau_out") {
        Some(p) => PathBuf::from(p),
        None => out.with_extension("tau.csv"),
    };
    rct_data::write_csv(&dataset, &out).map_err(input_err)?;
    let mut text = String::from("tau\n");
    for t in &tau {
        let _ = writeln!(text, "{t}");
    }
    write_atomic(&tau_out, &text)?;
    println!("dataset = {}", out.display());
    println!("true_tau = {}", tau_out.display());
    print_summary(&dataset)
}

fn load_trial(cfg: &Config) -> Result<RctDataset, CliError> {
    let input = cfg
        .optional("input")
        .ok_or_else(|| CliError::Input("no input file given".into()))?;
    let schema: Schema = cfg.get("schema")?;
    rct_data::load_csv(input, schema).map_err(input_err)
}

pub fn summarize(common: &Common, flags: Flags) -> Result<(), CliError> {
    let cfg = settings(&[("input", ""), ("schema", "generic"), ("seed", "0"), ("out", "")], common, flags)?;
    if common.show_config {
        print!("{cfg}");
        return Ok(());
    }
    print_summary(&load_trial(&cfg)?)
}

fn cell_name(m: Metamodel, l: &LearnerConfig) -> String {
    format!("{m}_{l}")
}

fn curve_csv(curve: &UpliftCurve) -> String {
    curve.to_csv()
}

pub fn bench(common: &Common, flags: Flags) -> Result<(), CliError> {
    let defaults = with_synthetic(&[
        ("input", ""),
        ("schema", "generic"),
        ("max_records", "0"),
        ("n", "20000"),
        ("metamodels", "CVT,StratifiedCVT,FlippedCVT"),
        ("learners", "LR"),
        ("reps", "20"),
        ("train_frac", "0.7"),
        ("grid", "101"),
        ("seed", "0"),
        ("out", "bench_out"),
        ("title", "uplift curves"),
    ]);
    let cfg = settings(&defaults, common, flags)?;
    if common.show_config {
        print!("{cfg}");
        return Ok(());
    }
    let seed: u64 = cfg.get("seed")?;
    let metamodels: Vec<Metamodel> = cfg.list("metamodels")?;
    let learners: Vec<LearnerConfig> = cfg.list("learners")?;
    if metamodels.is_empty() || learners.is_empty() {
        return Err(CliError::Input("need at least one metamodel and one learner".into()));
    }
    let holdout = HoldoutConfig {
        reps: cfg.get("reps")?,
        train_frac: cfg.get("train_frac")?,
        seed,
        grid_size: cfg.get("grid")?,
        ..HoldoutConfig::default()
    };
    holdout.validate().map_err(input_err)?;

    let mut dataset = if cfg.optional("input").is_some() {
        load_trial(&cfg)?
    } else {
        let spec = synthetic_spec(&cfg, seed)?;
        generate_synthetic(&spec, cfg.get("n")?, derive_seed(seed, 1))
            .map_err(input_err)?
            .0
    };
    let cap: usize = cfg.get("max_records")?;
    if cap > 0 {
        dataset = dataset.sample_records(cap, derive_seed(seed, 2));
    }

    let out = PathBuf::from(cfg.raw("out"));
    create_dir(&out)?;
    write_atomic(&out.join("config.txt"), &cfg.to_string())?;

    let mut summary = String::from("cell,metamodel,learner,status,reps,mauuc_mean,mauuc_std,curve_mauuc\n");
    let mut series = Vec::new();
    let mut failures = 0;
    let cells = metamodels.len() * learners.len();
    for &m in &metamodels {
        for l in &learners {
            let name = cell_name(m, l);
            match repeated_holdout(&dataset, m, l, &holdout) {
                Ok(report) => {
                    let csv = curve_csv(&report.curve);
                    write_atomic(&out.join(format!("{name}.curve.csv")), &csv)?;
                    write_atomic(&out.join(format!("{name}.report.txt")), &format!("status=ok\n{}", report.to_kv()))?;
                    // legend value is recomputed from the emitted curve
                    let curve_value = mauuc(&parse_curve(&csv).map_err(experiment_err)?);
                    let _ = writeln!(
                        summary,
                        "{name},{m},{l},ok,{},{},{},{}",
                        report.reps(),
                        report.mean,
                        report.std,
                        curve_value
                    );
                    println!(
                        "{name:<28} mAUUC {:>10.4} ± {:<10.4} retries {}",
                        report.mean, report.std, report.retries
                    );
                    series.push(Series {
                        label: format!("{name} ({curve_value:.2})"),
                        points: report.curve.fractions.iter().copied().zip(report.curve.gains.iter().copied()).collect(),
                    });
                }
                Err(e) => {
                    failures += 1;
                    let msg = e.to_string().replace('\n', " ");
                    write_atomic(
                        &out.join(format!("{name}.report.txt")),
                        &format!("status=failed\nmetamodel={m}\nlearner={l}\nerror={msg}\n"),
                    )?;
                    let _ = writeln!(summary, "{name},{m},{l},failed,0,,,");
                    println!("{name:<28} failed: {msg}");
                }
            }
        }
    }
    write_atomic(&out.join("summary.csv"), &summary)?;
    if !series.is_empty() {
        write_atomic(&out.join("curves.svg"), &svg::overlay(cfg.raw("title"), &series))?;
    }
    if failures == cells {
        return Err(CliError::Experiment("every benchmark cell failed".into()));
    }
    Ok(())
}

pub fn classif(common: &Common, flags: Flags) -> Result<(), CliError> {
    let defaults = [
        ("input", ""),
        ("minority_rate", "1"),
        ("n", "1000"),
        ("n_minority", "20"),
        ("n_features", "20"),
        ("n_informative", "2"),
        ("n_redundant", "2"),
        ("clusters_per_class", "2"),
        ("class_sep", "1"),
        ("flip_y", "0.01"),
        ("learners", "LR"),
        ("corrections", "none,flipping,undersampling"),
        ("folds", "5"),
        ("reps", "100"),
        ("seed", "0"),
        ("out", "classif_out"),
    ];
    let cfg = settings(&defaults, common, flags)?;
    if common.show_config {
        print!("{cfg}");
        return Ok(());
    }
    let seed: u64 = cfg.get("seed")?;
    let learners: Vec<LearnerConfig> = cfg.list("learners")?;
    let corrections: Vec<Correction> = cfg.list("corrections")?;
    if learners.is_empty() || corrections.is_empty() {
        return Err(CliError::Input("need at least one learner and one correction".into()));
    }
    let mut data: LabeledData = match cfg.optional("input") {
        Some(path) => rct_data::load_labeled_csv(path).map_err(input_err)?,
        None => generate_classification(&ClassificationSpec {
            n: cfg.get("n")?,
            n_minority: cfg.get("n_minority")?,
            n_features: cfg.get("n_features")?,
            n_informative: cfg.get("n_informative")?,
            n_redundant: cfg.get("n_redundant")?,
            clusters_per_class: cfg.get("clusters_per_class")?,
            class_sep: cfg.get("class_sep")?,
            flip_y: cfg.get("flip_y")?,
            seed: derive_seed(seed, 1),
        })
        .map_err(input_err)?,
    };
    let rate: f64 = cfg.get("minority_rate")?;
    if rate < 1.0 {
        data = data.subsample_minority(rate, derive_seed(seed, 2)).map_err(input_err)?;
    }
    let cv = CvConfig {
        folds: cfg.get("folds")?,
        reps: cfg.get("reps")?,
        seed,
    };
    let out = PathBuf::from(cfg.raw("out"));
    create_dir(&out)?;
    write_atomic(&out.join("config.txt"), &cfg.to_string())?;

    let minority = data.response().iter().filter(|&&y| y != data.majority_class()).count();
    let mut table = format!("records = {}\nminority_records = {minority}\n\n{:<16}", data.n(), "classifier");
    for c in &corrections {
        let _ = write!(table, " {:>24}", c.to_string());
    }
    table.push('\n');
    let mut values = String::from("classifier,correction,rep,auroc\n");
    let (mut failures, cells) = (0, learners.len() * corrections.len());
    for l in &learners {
        let _ = write!(table, "{:<16}", l.to_string());
        for &c in &corrections {
            match stratified_cv_auroc(&data, l, c, &cv) {
                Ok(r) => {
                    let _ = write!(table, " {:>24}", format!("{:.4} ± {:.4}", r.mean, r.std));
                    for (rep, v) in r.values.iter().enumerate() {
                        let _ = writeln!(values, "{l},{c},{rep},{v}");
                    }
                }
                Err(e) => {
                    failures += 1;
                    let _ = write!(table, " {:>24}", "failed");
                    eprintln!("upflip: {l}/{c}: {e}");
                }
            }
        }
        table.push('\n');
    }
    print!("{table}");
    write_atomic(&out.join("table.txt"), &table)?;
    write_atomic(&out.join("values.csv"), &values)?;
    if failures == cells {
        return Err(CliError::Experiment("every classification cell failed".into()));
    }
    Ok(())
}

/// Parses a `fraction,gain` CSV produced by `bench`.
pub fn parse_curve(text: &str) -> Result<UpliftCurve, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("fraction,gain") {
        return Err("expected header `fraction,gain`".into());
    }
    let (mut fractions, mut gains) = (vec![], vec![]);
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (f, g) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected two columns", i + 2))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
        fractions.push(num(f)?);
        gains.push(num(g)?);
    }
    if fractions.len() < 2 {
        return Err("curve needs at least two points".into());
    }
    Ok(UpliftCurve {
        fractions,
        gains,
        absent_group_points: 0,
    })
}

pub fn curves(common: &Common, inputs: &[PathBuf], title: Option<&str>) -> Result<(), CliError> {
    let flags = [title.map(|t| ("title", t.to_string()))];
    let cfg = settings(&[("title", "uplift curves"), ("seed", "0"), ("out", "curves.svg")], common, &flags)?;
    if common.show_config {
        print!("{cfg}");
        return Ok(());
    }
    if inputs.is_empty() {
        return Err(CliError::Input("no curve files given".into()));
    }
    let mut series = Vec::new();
    for path in inputs {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let curve = parse_curve(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let name = path
            .file_name()
            .and_then(|s| s.to_str())
            .map(|s| s.trim_end_matches(".csv").trim_end_matches(".curve").to_string())
            .unwrap_or_default();
        let value = evaluation::mauuc(&curve);
        println!("{name} mAUUC {value:.4}");
        series.push(Series {
            label: format!("{name} ({value:.2})"),
            points: curve.fractions.iter().copied().zip(curve.gains.iter().copied()).collect(),
        });
    }
    write_atomic(Path::new(cfg.raw("out")), &svg::overlay(cfg.raw("title"), &series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_round_trip() {
        let c = UpliftCurve {
            fractions: vec![0.0, 0.5, 1.0],
            gains: vec![0.0, 0.123456789012345, -0.1],
            absent_group_points: 0,
        };
        assert_eq!(parse_curve(&curve_csv(&c)).unwrap(), c);
        assert!(parse_curve("a,b\n0,0\n").is_err());
        assert!(parse_curve("fraction,gain\n0,x\n1,0\n").is_err());
    }
}

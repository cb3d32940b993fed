use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::stages::{Exclusion, ModelEvaluation, ModelImportance, Prepared, StationData, StatsReport};
use super::RunConfig;
use crate::eval::GammaPrecision;
use crate::models::ModelKind;
use crate::spatial::ImputeSummary;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationReport {
    pub station_id: String,
    pub features: Vec<String>,
    pub eval_start: NaiveDateTime,
    pub n_train_rows: usize,
    pub n_eval_rows: usize,
    pub dropped_train_rows: usize,
    pub dropped_eval_rows: usize,
    pub imputation: ImputeSummary,
    pub stats: StatsReport,
    pub models: Vec<ModelEvaluation>,
    pub importance: Vec<ModelImportance>,
}

impl StationReport {
    pub fn assemble(
        data: &StationData,
        prepared: &Prepared,
        stats: StatsReport,
        models: Vec<ModelEvaluation>,
        importance: Vec<ModelImportance>,
    ) -> Self {
        StationReport {
            station_id: data.station_id.clone(),
            features: data.table.feature_names(),
            eval_start: prepared.eval_start,
            n_train_rows: prepared.train.n_rows(),
            n_eval_rows: prepared.eval.n_rows(),
            dropped_train_rows: prepared.dropped_train_rows,
            dropped_eval_rows: prepared.dropped_eval_rows,
            imputation: data.imputation.clone(),
            stats,
            models,
            importance,
        }
    }

    pub fn model(&self, kind: ModelKind) -> Option<&ModelEvaluation> {
        self.models.iter().find(|m| m.model == kind)
    }

    pub fn importance(&self, kind: ModelKind) -> Option<&ModelImportance> {
        self.importance.iter().find(|m| m.model == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the pretty-printed `config` below.
    pub config_sha256: String,
    pub config: RunConfig,
    pub stations: Vec<String>,
    pub excluded: Vec<Exclusion>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, stations: Vec<String>, excluded: Vec<Exclusion>) -> Self {
        let mut notes = Vec::new();
        let missing: Vec<&str> = ModelKind::ALL
            .iter()
            .filter(|k| !cfg.models.contains(k))
            .map(|k| k.as_str())
            .collect();
        if !missing.is_empty() {
            notes.push(format!("models restricted; not run: {}", missing.join(", ")));
        }
        if !cfg.models.iter().any(|k| *k != ModelKind::Prior) {
            notes.push("no attribution reports: only the prior model was run".into());
        }
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: cfg.sha256(),
            config: cfg.clone(),
            stations,
            excluded,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub manifest: Manifest,
    pub stations: Vec<StationReport>,
}

impl ReportBundle {
    /// Adds notes for every degenerate artifact so the manifest lists them.
    pub fn new(mut manifest: Manifest, stations: Vec<StationReport>) -> Self {
        for s in &stations {
            for m in &s.models {
                if let Some(n) = &m.note {
                    manifest.notes.push(format!("{}/{}: {n}", s.station_id, m.model));
                }
            }
            for i in &s.importance {
                for n in &i.notes {
                    manifest
                        .notes
                        .push(format!("{}/{} attribution: {n}", s.station_id, i.model));
                }
            }
        }
        ReportBundle { manifest, stations }
    }

    pub fn station(&self, id: &str) -> Option<&StationReport> {
        self.stations.iter().find(|s| s.station_id == id)
    }
}

/// Formats with six significant digits: plain decimals for magnitudes in
/// `[1e-4, 1e15)`, otherwise scientific notation.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let rounded: f64 = sci.parse().expect("formatted float parses");
    if (1e-4..1e15).contains(&rounded.abs()) {
        return rounded.to_string();
    }
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{mantissa}e{exp}")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    station_id: &'a str,
    eval_start: NaiveDateTime,
    n_eval_rows: usize,
    models: Vec<MetricsEntry<'a>>,
}

#[derive(Serialize)]
struct MetricsEntry<'a> {
    model: ModelKind,
    status: &'static str,
    auc: Option<f64>,
    gamma_precision: Vec<GammaDoc>,
    note: Option<&'a str>,
}

#[derive(Serialize)]
struct GammaDoc {
    gamma: f64,
    feasible: bool,
    p_star_gamma: Option<f64>,
    achieving_c: Option<f64>,
}

fn metrics_json(s: &StationReport) -> Result<Vec<u8>> {
    let doc = MetricsDoc {
        station_id: &s.station_id,
        eval_start: s.eval_start,
        n_eval_rows: s.n_eval_rows,
        models: s
            .models
            .iter()
            .map(|m| MetricsEntry {
                model: m.model,
                status: if m.auc.is_some() { "ok" } else { "degenerate" },
                auc: m.auc,
                gamma_precision: m
                    .gammas
                    .iter()
                    .map(|g| match g.result {
                        GammaPrecision::Feasible { p_star, c } => GammaDoc {
                            gamma: g.gamma,
                            feasible: true,
                            p_star_gamma: Some(p_star),
                            achieving_c: Some(c),
                        },
                        GammaPrecision::Infeasible => GammaDoc {
                            gamma: g.gamma,
                            feasible: false,
                            p_star_gamma: None,
                            achieving_c: None,
                        },
                    })
                    .collect(),
                note: m.note.as_deref(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

fn station_files(s: &StationReport) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let corr = &s.stats.corr;
    let mut corr_header = vec!["feature"];
    corr_header.extend(corr.names.iter().map(String::as_str));
    let corr_csv = csv_bytes(
        &corr_header,
        corr.names
            .iter()
            .zip(&corr.values)
            .map(|(n, row)| std::iter::once(n.clone()).chain(row.iter().map(|v| fmt6(*v))).collect()),
    )?;
    let tests_csv = csv_bytes(
        &["feature", "method", "statistic", "dof", "p_value", "note"],
        s.stats.tests.iter().map(|t| match &t.result {
            Some(r) => vec![
                t.feature.clone(),
                r.method.as_str().to_string(),
                fmt6(r.statistic),
                fmt6(r.dof),
                fmt6(r.p_value),
                String::new(),
            ],
            None => vec![
                t.feature.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                t.note.clone().unwrap_or_default(),
            ],
        }),
    )?;
    let iv_csv = csv_bytes(
        &["feature", "iv", "band", "note"],
        s.stats.iv.iter().map(|e| match &e.result {
            Some(r) => vec![
                e.feature.clone(),
                fmt6(r.iv),
                r.band.as_str().to_string(),
                String::new(),
            ],
            None => vec![
                e.feature.clone(),
                String::new(),
                String::new(),
                e.note.clone().unwrap_or_default(),
            ],
        }),
    )?;
    let roc_csv = csv_bytes(
        &["model", "fpr", "tpr"],
        s.models.iter().flat_map(|m| {
            m.roc
                .iter()
                .map(move |p| vec![m.model.to_string(), fmt6(p.fpr), fmt6(p.tpr)])
        }),
    )?;
    let curve_csv = csv_bytes(
        &["model", "c", "precision", "frac_predicted_zero"],
        s.models.iter().flat_map(|m| {
            m.precision.iter().flat_map(move |c| {
                c.points.iter().map(move |p| {
                    vec![
                        m.model.to_string(),
                        fmt6(p.c),
                        fmt6(p.precision),
                        fmt6(p.frac_predicted_zero),
                    ]
                })
            })
        }),
    )?;
    let shap_csv = csv_bytes(
        &["model", "feature", "value", "std", "rank", "mean_signed"],
        s.importance.iter().flat_map(|imp| {
            imp.report.iter().flat_map(move |r| {
                let shap = imp.shap.as_ref();
                r.features.iter().map(move |f| {
                    let std = shap
                        .and_then(|sh| sh.features.iter().position(|n| n == &f.feature).map(|j| sh.std[j]))
                        .unwrap_or(0.0);
                    vec![
                        imp.model.to_string(),
                        f.feature.clone(),
                        fmt6(f.mean_abs_shap),
                        fmt6(std),
                        f.rank.to_string(),
                        fmt6(f.mean_signed_shap),
                    ]
                })
            })
        }),
    )?;
    let perm_csv = csv_bytes(
        &["model", "feature", "value", "std", "rank"],
        s.importance.iter().flat_map(|imp| {
            imp.perm.iter().flat_map(move |p| {
                let mut order: Vec<usize> = (0..p.features.len()).collect();
                order.sort_by(|&a, &b| p.features[b].mean.total_cmp(&p.features[a].mean));
                let mut rank = vec![0; order.len()];
                for (k, &j) in order.iter().enumerate() {
                    rank[j] = k + 1;
                }
                p.features.iter().zip(rank).map(move |(f, r)| {
                    vec![
                        imp.model.to_string(),
                        f.feature.clone(),
                        fmt6(f.mean),
                        fmt6(f.std),
                        r.to_string(),
                    ]
                })
            })
        }),
    )?;
    Ok(vec![
        ("corr.csv", corr_csv),
        ("tests.csv", tests_csv),
        ("iv.csv", iv_csv),
        ("metrics.json", metrics_json(s)?),
        ("roc.csv", roc_csv),
        ("precision_curve.csv", curve_csv),
        ("shap.csv", shap_csv),
        ("perm.csv", perm_csv),
    ])
}

/// Directory name for a station: characters outside `[A-Za-z0-9._-]`
/// become `_`.
pub fn station_dir_name(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        format!("_{}", s.len())
    } else {
        s
    }
}

/// Writes the bundle under `out_dir`: one subdirectory per station and a
/// shared `manifest.json`. Files are written to a sibling staging directory
/// first and moved into place once complete; an existing `out_dir` is
/// replaced.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<()> {
    let mut dirs: Vec<String> = bundle
        .stations
        .iter()
        .map(|s| station_dir_name(&s.station_id))
        .collect();
    dirs.sort();
    if dirs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Schema("two station ids map to the same directory name".into()));
    }
    let name = out_dir
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no final component", out_dir.display())))?;
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = parent.join(format!(".{}.staging-{}", name.to_string_lossy(), std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    let result = (|| -> Result<()> {
        fs::create_dir(&staging)?;
        for s in &bundle.stations {
            let dir = staging.join(station_dir_name(&s.station_id));
            fs::create_dir(&dir)?;
            for (file, bytes) in station_files(s)? {
                fs::write(dir.join(file), bytes)?;
            }
        }
        let mut manifest = serde_json::to_vec_pretty(&bundle.manifest)?;
        manifest.push(b'\n');
        fs::write(staging.join("manifest.json"), manifest)?;
        if out_dir.exists() {
            fs::remove_dir_all(out_dir)?;
        }
        fs::rename(&staging, out_dir)?;
        Ok(())
    })();
    if result.is_err() && staging.exists() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

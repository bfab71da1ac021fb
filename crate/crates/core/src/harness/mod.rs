//! Experiment harness: corpus ingestion with user-disjoint splitting,
//! reconstruction-method dispatch, quality and recognition experiment
//! drivers, and CSV reporting.
//!
//! A corpus lives in a directory tree `root/<eye_id>/<image>.png` with an
//! `annotations.csv` file mapping each image to its pupil and sclera
//! circles. Each eye is treated as a distinct user; splits never share a
//! user between training and testing.

mod config;
mod experiment;
mod synth;

pub use config::{
    ExperimentConfig, IrisSettings, SaeSettings, SplitSettings, SrcnnSettings,
};
pub use experiment::{
    load_model, prepare_model, reconstruct, run_quality_experiment, run_recognition_experiment,
    TrainedModel,
};
pub use synth::{generate_corpus, synth_eye, SynthConfig};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::image::{load_grayscale, Image};
use crate::iris::{Circle, SegmentationAnnotation};

/// Train fraction matching a 116-train / 133-test user split at 249 users.
pub const DEFAULT_TRAIN_FRACTION: f64 = 116.0 / 249.0;

/// Reconstruction methods the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bilinear,
    Bicubic,
    SrcnnFs,
    SrcnnTl,
    SrcnnFt,
    Sae,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Bilinear,
        Method::Bicubic,
        Method::SrcnnFs,
        Method::SrcnnTl,
        Method::SrcnnFt,
        Method::Sae,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Bilinear => "bilinear",
            Method::Bicubic => "bicubic",
            Method::SrcnnFs => "srcnn-fs",
            Method::SrcnnTl => "srcnn-tl",
            Method::SrcnnFt => "srcnn-ft",
            Method::Sae => "sae",
        }
    }

    /// Learned methods need a model (trained here or loaded from disk).
    pub fn is_learned(&self) -> bool {
        !matches!(self, Method::Bilinear | Method::Bicubic)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{}'", s)))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which side of the user-disjoint split an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// One annotated corpus image. Pixel data is loaded lazily via [`load`].
///
/// [`load`]: CorpusEntry::load
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    /// Relative path under the corpus root, e.g. `eye03/img_1.png`.
    pub image_id: String,
    pub path: PathBuf,
    /// The entry's user identity (each eye is a user).
    pub eye_id: String,
    pub annotation: SegmentationAnnotation,
    pub split: Split,
}

impl CorpusEntry {
    pub fn load(&self) -> Result<Image> {
        load_grayscale(&self.path)
    }
}

/// An annotation row that could not become a corpus entry.
#[derive(Debug, Clone)]
pub struct Reject {
    pub image_id: String,
    pub reason: String,
}

/// How to divide users between the train and test splits.
#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// First `fraction` of users (sorted by id, floored count) train.
    Fraction(f64),
    /// Explicit disjoint user lists covering the whole corpus.
    Named {
        train: Vec<String>,
        test: Vec<String>,
    },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Fraction(DEFAULT_TRAIN_FRACTION)
    }
}

/// The ingested corpus: usable entries plus a report of rejected rows.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub rejects: Vec<Reject>,
}

impl Corpus {
    pub fn entries_in(&self, split: Split) -> Vec<&CorpusEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    /// Sorted unique user ids in one split.
    pub fn users_in(&self, split: Split) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.eye_id.as_str())
            .collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    image_id: String,
    pupil_cx: f64,
    pupil_cy: f64,
    pupil_r: f64,
    sclera_cx: f64,
    sclera_cy: f64,
    sclera_r: f64,
}

/// Reads the annotation file, checks every referenced image, derives user
/// ids from the directory layout, and assigns the user-disjoint split.
/// Rows with missing/unreadable images or inconsistent circles land in the
/// rejects report; a duplicate image id aborts the ingest.
pub fn ingest(root: &Path, annotation_file: &Path, split: &SplitSpec) -> Result<Corpus> {
    let mut reader = csv::Reader::from_path(annotation_file)?;
    let mut seen = BTreeSet::new();
    let mut pending = Vec::new();
    let mut rejects = Vec::new();

    for record in reader.deserialize::<AnnotationRow>() {
        let row = match record {
            Ok(row) => row,
            Err(e) => {
                rejects.push(Reject {
                    image_id: String::from("<unparsed>"),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if !seen.insert(row.image_id.clone()) {
            return Err(Error::Corpus(format!(
                "duplicate image id '{}' in annotations",
                row.image_id
            )));
        }
        let mut reject = |reason: String| {
            rejects.push(Reject {
                image_id: row.image_id.clone(),
                reason,
            })
        };
        let rel = Path::new(&row.image_id);
        let eye_id = match rel.parent().and_then(|p| p.to_str()) {
            Some(parent) if !parent.is_empty() => parent.to_string(),
            _ => {
                reject("image id must have the form <eye>/<file>".into());
                continue;
            }
        };
        let annotation = match SegmentationAnnotation::new(
            Circle::new(row.pupil_cx, row.pupil_cy, row.pupil_r),
            Circle::new(row.sclera_cx, row.sclera_cy, row.sclera_r),
        ) {
            Ok(a) => a,
            Err(e) => {
                reject(e.to_string());
                continue;
            }
        };
        let path = root.join(rel);
        if let Err(e) = image::image_dimensions(&path) {
            reject(format!("unreadable image: {}", e));
            continue;
        }
        pending.push(CorpusEntry {
            image_id: row.image_id,
            path,
            eye_id,
            annotation,
            split: Split::Test,
        });
    }

    assign_split(&mut pending, split)?;
    Ok(Corpus {
        entries: pending,
        rejects,
    })
}

fn assign_split(entries: &mut [CorpusEntry], spec: &SplitSpec) -> Result<()> {
    let users: BTreeSet<String> = entries.iter().map(|e| e.eye_id.clone()).collect();
    let train_users: BTreeSet<String> = match spec {
        SplitSpec::Fraction(f) => {
            if !(0.0..=1.0).contains(f) {
                return Err(Error::Corpus(format!(
                    "train fraction {} outside [0, 1]",
                    f
                )));
            }
            let n_train = (users.len() as f64 * f).floor() as usize;
            users.iter().take(n_train).cloned().collect()
        }
        SplitSpec::Named { train, test } => {
            let train_set: BTreeSet<String> = train.iter().cloned().collect();
            let test_set: BTreeSet<String> = test.iter().cloned().collect();
            if let Some(both) = train_set.intersection(&test_set).next() {
                return Err(Error::Corpus(format!(
                    "user '{}' appears in both splits",
                    both
                )));
            }
            for user in &users {
                if !train_set.contains(user) && !test_set.contains(user) {
                    return Err(Error::Corpus(format!(
                        "user '{}' is not assigned to a split",
                        user
                    )));
                }
            }
            train_set
        }
    };
    for e in entries {
        e.split = if train_users.contains(&e.eye_id) {
            Split::Train
        } else {
            Split::Test
        };
    }
    Ok(())
}

/// One table cell: absent values (`None`) render as "-" in CSV, infinite
/// PSNR renders as "inf".
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    /// None for methods that need no training.
    pub train_factor: Option<u32>,
    pub eval_factor: u32,
    pub metric_or_scenario: String,
    pub value: Option<f64>,
}

/// Accumulated experiment cells; each (method, factors, metric) key may
/// appear only once.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        let dup = self.rows.iter().any(|r| {
            r.method == row.method
                && r.train_factor == row.train_factor
                && r.eval_factor == row.eval_factor
                && r.metric_or_scenario == row.metric_or_scenario
        });
        if dup {
            return Err(Error::invalid(format!(
                "duplicate report cell {}/{:?}/{}/{}",
                row.method, row.train_factor, row.eval_factor, row.metric_or_scenario
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn merge(&mut self, other: ExperimentReport) -> Result<()> {
        for row in other.rows {
            self.push(row)?;
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "method",
            "train_factor",
            "eval_factor",
            "metric_or_scenario",
            "value",
        ])?;
        for row in &self.rows {
            let train = row
                .train_factor
                .map(|f| f.to_string())
                .unwrap_or_else(|| "-".into());
            let value = match row.value {
                None => "-".into(),
                Some(v) if v.is_infinite() => "inf".into(),
                Some(v) => v.to_string(),
            };
            w.write_record([
                row.method.name(),
                &train,
                &row.eval_factor.to_string(),
                &row.metric_or_scenario,
                &value,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_corpus(dir: &Path, eyes: usize, images_per_eye: usize) {
        let cfg = SynthConfig {
            eyes,
            images_per_eye,
            seed: 7,
            ..SynthConfig::default()
        };
        generate_corpus(dir, &cfg).unwrap();
    }

    #[test]
    fn ingest_splits_ten_users_four_to_six() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), 10, 1);
        let corpus = ingest(
            dir.path(),
            &dir.path().join("annotations.csv"),
            &SplitSpec::default(),
        )
        .unwrap();
        assert_eq!(corpus.entries.len(), 10);
        assert!(corpus.rejects.is_empty());
        assert_eq!(corpus.users_in(Split::Train).len(), 4);
        assert_eq!(corpus.users_in(Split::Test).len(), 6);
        // User-disjointness: no eye id on both sides.
        let train = corpus.users_in(Split::Train);
        assert!(corpus.users_in(Split::Test).iter().all(|u| !train.contains(u)));
        // Eye ids come from the directory layout.
        assert!(corpus.entries.iter().all(|e| e.image_id.starts_with(&e.eye_id)));
    }

    #[test]
    fn ingest_rejects_missing_and_invalid_rows_but_continues() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), 2, 1);
        let ann = dir.path().join("annotations.csv");
        let mut f = std::fs::OpenOptions::new().append(true).open(&ann).unwrap();
        // A file that does not exist, an inverted annotation, and an id
        // without a directory component.
        writeln!(f, "eye00/ghost.png,170,160,30,170,160,105").unwrap();
        writeln!(f, "eye01/img_0.png.bad,170,160,120,170,160,105").unwrap();
        writeln!(f, "flat.png,170,160,30,170,160,105").unwrap();
        drop(f);

        let corpus = ingest(dir.path(), &ann, &SplitSpec::Fraction(0.5)).unwrap();
        assert_eq!(corpus.entries.len(), 2);
        assert_eq!(corpus.rejects.len(), 3);
        let ids: Vec<&str> = corpus.rejects.iter().map(|r| r.image_id.as_str()).collect();
        assert!(ids.contains(&"eye00/ghost.png"));
        assert!(ids.contains(&"flat.png"));
    }

    #[test]
    fn ingest_fails_on_duplicate_image_id() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), 1, 1);
        let ann = dir.path().join("annotations.csv");
        let mut f = std::fs::OpenOptions::new().append(true).open(&ann).unwrap();
        writeln!(f, "eye00/img_0.png,170,160,30,170,160,105").unwrap();
        drop(f);
        let err = ingest(dir.path(), &ann, &SplitSpec::default()).unwrap_err();
        assert!(err.to_string().contains("eye00/img_0.png"), "{}", err);
    }

    #[test]
    fn named_split_must_be_disjoint_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), 3, 1);
        let ann = dir.path().join("annotations.csv");

        let overlapping = SplitSpec::Named {
            train: vec!["eye00".into(), "eye01".into()],
            test: vec!["eye01".into(), "eye02".into()],
        };
        let err = ingest(dir.path(), &ann, &overlapping).unwrap_err();
        assert!(err.to_string().contains("eye01"), "{}", err);

        let incomplete = SplitSpec::Named {
            train: vec!["eye00".into()],
            test: vec!["eye01".into()],
        };
        let err = ingest(dir.path(), &ann, &incomplete).unwrap_err();
        assert!(err.to_string().contains("eye02"), "{}", err);

        let ok = SplitSpec::Named {
            train: vec!["eye00".into()],
            test: vec!["eye01".into(), "eye02".into()],
        };
        let corpus = ingest(dir.path(), &ann, &ok).unwrap();
        assert_eq!(corpus.users_in(Split::Train), vec!["eye00"]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("srcnn".parse::<Method>().is_err());
        assert!(Method::Sae.is_learned());
        assert!(!Method::Bicubic.is_learned());
    }

    #[test]
    fn report_rejects_duplicate_cells_and_renders_absent_values() {
        let mut report = ExperimentReport::new();
        let row = ReportRow {
            method: Method::Bicubic,
            train_factor: None,
            eval_factor: 2,
            metric_or_scenario: "psnr".into(),
            value: Some(f64::INFINITY),
        };
        report.push(row.clone()).unwrap();
        assert!(report.push(row).is_err());
        report
            .push(ReportRow {
                method: Method::Bicubic,
                train_factor: None,
                eval_factor: 2,
                metric_or_scenario: "vif_strip".into(),
                value: None,
            })
            .unwrap();
        let csv = report.to_csv_string().unwrap();
        assert!(csv.starts_with("method,train_factor,eval_factor,metric_or_scenario,value"));
        assert!(csv.contains("bicubic,-,2,psnr,inf"));
        assert!(csv.contains("bicubic,-,2,vif_strip,-"));
    }
}

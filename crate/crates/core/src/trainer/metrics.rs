//! Step/eval records, the metrics CSV, IoU and pseudo-label statistics.

use std::io::Write;

use crate::pointcloud::DenseLabels;
use crate::reliability::ReliabilityPartition;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "step,seg,rel,amb,mix,total,reliable_count,reliable_frac,pl_acc,miou,secs";

/// One row of the metrics history. Training rows carry the loss and
/// pseudo-label columns, evaluation rows carry `miou`; the other columns
/// are left empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRecord {
    pub step: u64,
    pub seg: Option<f64>,
    pub rel: Option<f64>,
    pub amb: Option<f64>,
    pub mix: Option<f64>,
    pub total: Option<f64>,
    pub reliable_count: Option<usize>,
    pub reliable_frac: Option<f64>,
    pub pl_acc: Option<f64>,
    pub miou: Option<f64>,
    pub secs: f64,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRecord {
    pub fn is_eval(&self) -> bool {
        self.miou.is_some()
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            opt(&self.seg),
            opt(&self.rel),
            opt(&self.amb),
            opt(&self.mix),
            opt(&self.total),
            opt(&self.reliable_count),
            opt(&self.reliable_frac),
            opt(&self.pl_acc),
            opt(&self.miou),
            self.secs
        )
    }

    pub fn parse_csv_row(line: &str, lineno: usize) -> Result<Self> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 11 columns, found {}", cols.len()),
            });
        }
        let names: Vec<&str> = CSV_HEADER.split(',').collect();
        let f = |i: usize| -> Result<Option<f64>> {
            if cols[i].is_empty() {
                return Ok(None);
            }
            cols[i].parse().map(Some).map_err(|_| Error::Parse {
                line: lineno,
                message: format!("column {}: bad number {:?}", names[i], cols[i]),
            })
        };
        let step = cols[0].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("column step: bad integer {:?}", cols[0]),
        })?;
        let reliable_count = if cols[6].is_empty() {
            None
        } else {
            Some(cols[6].parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("column reliable_count: bad integer {:?}", cols[6]),
            })?)
        };
        Ok(Self {
            step,
            seg: f(1)?,
            rel: f(2)?,
            amb: f(3)?,
            mix: f(4)?,
            total: f(5)?,
            reliable_count,
            reliable_frac: f(7)?,
            pl_acc: f(8)?,
            miou: f(9)?,
            secs: f(10)?.unwrap_or(0.0),
        })
    }
}

/// Parses a full metrics CSV. A header that differs from [`CSV_HEADER`] is
/// reported with the first mismatching column name.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::EmptyInput("metrics file is empty".into()))?;
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    let found: Vec<&str> = header.trim().split(',').collect();
    for (i, name) in expected.iter().enumerate() {
        match found.get(i) {
            Some(f) if f == name => {}
            Some(f) => {
                return Err(Error::Format(format!(
                    "metrics schema mismatch: column {} is {f:?}, expected {name:?}",
                    i + 1
                )))
            }
            None => {
                return Err(Error::Format(format!(
                    "metrics schema mismatch: missing column {name:?}"
                )))
            }
        }
    }
    if let Some(extra) = found.get(expected.len()) {
        return Err(Error::Format(format!(
            "metrics schema mismatch: unexpected column {extra:?}"
        )));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| MetricsRecord::parse_csv_row(l.trim(), i + 2))
        .collect()
}

/// Appends records to a CSV file, flushing after every row.
pub struct MetricsWriter<W: Write> {
    out: W,
    rows: usize,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(Self { out, rows: 0 })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", record.to_csv_row())?;
        self.rows += 1;
        self.out.flush()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Pooled confusion counts over any number of scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    /// `counts[truth][pred]`
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn add(&mut self, truth: &[usize], pred: &[usize]) -> Result<()> {
        if truth.len() != pred.len() {
            return Err(Error::arg("truth and prediction lengths differ"));
        }
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= self.n_classes || p >= self.n_classes {
                return Err(Error::arg(format!(
                    "class out of range: truth {t}, prediction {p}, C={}",
                    self.n_classes
                )));
            }
            self.counts[t][p] += 1;
        }
        Ok(())
    }

    /// Per-class IoU; `None` where the class is absent from both truth and
    /// prediction.
    pub fn iou(&self) -> Vec<Option<f64>> {
        (0..self.n_classes)
            .map(|c| {
                let tp = self.counts[c][c];
                let fn_: u64 = self.counts[c].iter().sum::<u64>() - tp;
                let fp: u64 = (0..self.n_classes).map(|t| self.counts[t][c]).sum::<u64>() - tp;
                let union = tp + fp + fn_;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean IoU over the classes present in the ground truth.
    pub fn miou(&self) -> Option<f64> {
        let ious = self.iou();
        let present: Vec<f64> = (0..self.n_classes)
            .filter(|&c| self.counts[c].iter().sum::<u64>() > 0)
            .map(|c| ious[c].expect("present classes have a union"))
            .collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub miou: f64,
    pub per_class_iou: Vec<Option<f64>>,
}

/// Accuracy of the one-hot pseudo labels against the dense truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabelStats {
    pub correct: usize,
    pub count: usize,
    /// Number of points considered.
    pub total: usize,
}

impl PseudoLabelStats {
    /// Accuracy; 1.0 on an empty reliable set (see [`Self::is_empty`]).
    pub fn accuracy(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            self.correct as f64 / self.count as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn merge(&mut self, other: &PseudoLabelStats) {
        self.correct += other.correct;
        self.count += other.count;
        self.total += other.total;
    }

    pub fn zero() -> Self {
        Self {
            correct: 0,
            count: 0,
            total: 0,
        }
    }
}

pub fn pseudo_label_stats(partition: &ReliabilityPartition, truth: &DenseLabels) -> Result<PseudoLabelStats> {
    if truth.len() != partition.n_points() {
        return Err(Error::arg("ground truth does not cover the scene"));
    }
    let mut stats = PseudoLabelStats {
        total: partition.n_points(),
        ..PseudoLabelStats::zero()
    };
    for i in partition.reliable_indices() {
        stats.count += 1;
        if partition.hard_labels[i] == truth.class_per_point[i] {
            stats.correct += 1;
        }
    }
    Ok(stats)
}

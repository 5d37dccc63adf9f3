//! Cloud file formats.
//!
//! ascii-xyz: one point per line, `x y z f_1..f_D [class [instance]]`, `#`
//! starts a comment. Without a layout directive every column after `z` is a
//! feature. The writer emits a directive comment of the form
//! `# feature_dim=3 label_columns=2` so that label columns survive a round
//! trip.
//!
//! binary: `RACPC1`, u64 N, u64 D_f, u8 has_labels, N×(3+D_f) f64 row-major,
//! then N×2 i64 (class, instance) when labelled. All little-endian.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::{DenseLabels, PointCloud};
use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 6] = b"RACPC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    AsciiXyz,
    Binary,
}

impl CloudFormat {
    /// `.xyz` and `.txt` are ascii, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") | Some("txt") => CloudFormat::AsciiXyz,
            _ => CloudFormat::Binary,
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<(PointCloud, Option<DenseLabels>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        CloudFormat::AsciiXyz => {
            let text = String::from_utf8(bytes)
                .map_err(|e| Error::Format(format!("{}: not utf-8: {e}", path.display())))?;
            parse_ascii(&text)
        }
        CloudFormat::Binary => decode_binary(&bytes),
    }
}

pub fn save_cloud(
    cloud: &PointCloud,
    labels: Option<&DenseLabels>,
    path: &Path,
    format: CloudFormat,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != cloud.n_points() {
            return Err(Error::arg(format!(
                "{} labels for {} points",
                l.len(),
                cloud.n_points()
            )));
        }
    }
    let bytes = match format {
        CloudFormat::AsciiXyz => format_ascii(cloud, labels).into_bytes(),
        CloudFormat::Binary => encode_binary(cloud, labels),
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

struct Layout {
    feature_dim: Option<usize>,
    label_columns: usize,
}

fn parse_directive(comment: &str, layout: &mut Layout) {
    for token in comment.split_whitespace() {
        if let Some((key, value)) = token.split_once('=') {
            match (key, value.parse::<usize>()) {
                ("feature_dim", Ok(v)) => layout.feature_dim = Some(v),
                ("label_columns", Ok(v)) => layout.label_columns = v.min(2),
                _ => {}
            }
        }
    }
}

fn parse_ascii(text: &str) -> Result<(PointCloud, Option<DenseLabels>)> {
    let mut layout = Layout {
        feature_dim: None,
        label_columns: 0,
    };
    let mut width: Option<usize> = None;
    let mut values: Vec<f64> = Vec::new();
    let mut classes = Vec::new();
    let mut instances = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if width.is_none() {
                parse_directive(comment, &mut layout);
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let expected = *width.get_or_insert_with(|| match layout.feature_dim {
            Some(d) => 3 + d + layout.label_columns,
            None => cols.len(),
        });
        if cols.len() != expected || cols.len() < 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected {} columns, found {}", expected.max(3), cols.len()),
            });
        }
        let n_values = expected - layout.label_columns;
        for tok in &cols[..n_values] {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("non-numeric value {tok:?}"),
            })?;
            values.push(v);
        }
        for (slot, tok) in cols[n_values..].iter().enumerate() {
            let v: i64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("non-integer label {tok:?}"),
            })?;
            if slot == 0 {
                if v < 0 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("negative class id {v}"),
                    });
                }
                classes.push(v as usize);
            } else {
                instances.push(v);
            }
        }
    }

    let Some(width) = width else {
        return Err(Error::EmptyInput("no data lines".into()));
    };
    let n_values = width - layout.label_columns;
    let n = values.len() / n_values;
    let stacked = Array2::from_shape_vec((n, n_values), values).expect("row widths checked");
    let cloud = split_stacked(stacked)?;
    let labels = match layout.label_columns {
        0 => None,
        1 => Some(DenseLabels::new(classes, vec![-1; n])?),
        _ => Some(DenseLabels::new(classes, instances)?),
    };
    Ok((cloud, labels))
}

fn split_stacked(stacked: Array2<f64>) -> Result<PointCloud> {
    let locations = stacked.slice(ndarray::s![.., ..3]).to_owned();
    let features = stacked.slice(ndarray::s![.., 3..]).to_owned();
    PointCloud::new(locations, features)
}

fn format_ascii(cloud: &PointCloud, labels: Option<&DenseLabels>) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let label_columns = if labels.is_some() { 2 } else { 0 };
    let _ = writeln!(
        out,
        "# feature_dim={} label_columns={}",
        cloud.feature_dim(),
        label_columns
    );
    for i in 0..cloud.n_points() {
        let mut first = true;
        for v in cloud.locations().row(i).iter().chain(cloud.features().row(i)) {
            if !first {
                out.push(' ');
            }
            first = false;
            // Display for f64 is the shortest string that parses back exactly.
            let _ = write!(out, "{v}");
        }
        if let Some(l) = labels {
            let _ = write!(out, " {} {}", l.class_per_point[i], l.instance_per_point[i]);
        }
        out.push('\n');
    }
    out
}

fn encode_binary(cloud: &PointCloud, labels: Option<&DenseLabels>) -> Vec<u8> {
    let n = cloud.n_points();
    let d = cloud.feature_dim();
    let mut out = Vec::with_capacity(23 + n * (3 + d) * 8 + labels.map_or(0, |_| n * 16));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.push(labels.is_some() as u8);
    for i in 0..n {
        for v in cloud.locations().row(i).iter().chain(cloud.features().row(i)) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(l) = labels {
        for i in 0..n {
            out.extend_from_slice(&(l.class_per_point[i] as i64).to_le_bytes());
            out.extend_from_slice(&l.instance_per_point[i].to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated binary cloud at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_binary(bytes: &[u8]) -> Result<(PointCloud, Option<DenseLabels>)> {
    if bytes.is_empty() {
        return Err(Error::EmptyInput("empty binary cloud file".into()));
    }
    let mut r = Reader { bytes, pos: 0 };
    if r.take(BINARY_MAGIC.len())? != BINARY_MAGIC {
        return Err(Error::Format("bad magic, expected RACPC1".into()));
    }
    let n = r.u64()? as usize;
    let d = r.u64()? as usize;
    let has_labels = match r.take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("bad has_labels flag {other}"))),
    };
    let width = 3 + d;
    let payload = n
        .checked_mul(width)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    if payload > bytes.len() {
        return Err(Error::Format("truncated binary cloud".into()));
    }
    let mut values = Vec::with_capacity(n * width);
    for _ in 0..n * width {
        values.push(r.f64()?);
    }
    let stacked = Array2::from_shape_vec((n, width), values).expect("sized above");
    let cloud = split_stacked(stacked)?;
    let labels = if has_labels {
        let mut classes = Vec::with_capacity(n);
        let mut instances = Vec::with_capacity(n);
        for _ in 0..n {
            let c = r.i64()?;
            if c < 0 {
                return Err(Error::Format(format!("negative class id {c}")));
            }
            classes.push(c as usize);
            instances.push(r.i64()?);
        }
        Some(DenseLabels::new(classes, instances)?)
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after binary cloud",
            bytes.len() - r.pos
        )));
    }
    Ok((cloud, labels))
}

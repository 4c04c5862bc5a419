//! Vibration recording ingestion, framing and frame normalization.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::nn::FeatureMaps;
use crate::scalar::{count, Scalar};

/// Sampling rate of the IMS bearing recordings.
pub const IMS_SAMPLE_RATE: f64 = 20_480.0;

/// Samples per classifier frame.
pub const DEFAULT_FRAME_LEN: usize = 1000;

pub const NUM_CLASSES: usize = 4;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("row {row}: cannot parse `{token}` as a number")]
    Parse { row: usize, token: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("file contains no data rows")]
    Empty,
    #[error("input is not valid UTF-8 text")]
    NotText,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: Box<SignalError>,
    },
}

/// Bearing condition class, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Healthy = 0,
    EarlyFault = 1,
    ModerateFault = 2,
    SevereFault = 3,
}

impl Severity {
    pub const ALL: [Severity; NUM_CLASSES] = [
        Severity::Healthy,
        Severity::EarlyFault,
        Severity::ModerateFault,
        Severity::SevereFault,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short name used on the command line and in file names.
    pub fn name(self) -> &'static str {
        match self {
            Severity::Healthy => "healthy",
            Severity::EarlyFault => "early",
            Severity::ModerateFault => "moderate",
            Severity::SevereFault => "severe",
        }
    }

    /// Column label used in metric tables.
    pub fn abbrev(self) -> &'static str {
        match self {
            Severity::Healthy => "H",
            Severity::EarlyFault => "ELF",
            Severity::ModerateFault => "MLF",
            Severity::SevereFault => "SLF",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Severity {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s || c.abbrev().eq_ignore_ascii_case(s))
            .ok_or_else(|| SignalError::Argument(format!("unknown class `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<f64>,
}

/// A multi-channel recording at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub sample_rate: f64,
    pub channels: Vec<Channel>,
    pub source_id: String,
}

impl RawRecording {
    pub fn new(
        sample_rate: f64,
        channels: Vec<Channel>,
        source_id: impl Into<String>,
    ) -> Result<Self, SignalError> {
        if !(sample_rate > 0.0) {
            return Err(SignalError::Argument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let len = channels.first().map_or(0, |c| c.samples.len());
        if len == 0 {
            return Err(SignalError::Empty);
        }
        if channels.iter().any(|c| c.samples.len() != len) {
            return Err(SignalError::Argument(
                "channels must have equal length".into(),
            ));
        }
        Ok(Self {
            sample_rate,
            channels,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the recording as comma-separated rows, one per sample instant.
    ///
    /// Values use the shortest representation that parses back to the same
    /// `f64`, so [`ingest_csv`] reproduces the samples bit for bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24 * self.channels.len());
        for t in 0..self.len() {
            for (c, ch) in self.channels.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                out.push_str(&ch.samples[t].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parses delimiter-separated numeric rows into columns.
fn parse_rows(
    text: &str,
    skip_header: bool,
    split: impl Fn(&str) -> Vec<&str>,
) -> Result<Vec<Vec<f64>>, SignalError> {
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut lines = text.lines().enumerate();
    if skip_header {
        lines.next();
    }
    for (idx, line) in lines {
        let row = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens = split(trimmed);
        if columns.is_empty() {
            columns = vec![Vec::new(); tokens.len()];
        } else if tokens.len() != columns.len() {
            return Err(SignalError::Ragged {
                row,
                expected: columns.len(),
                found: tokens.len(),
            });
        }
        for (col, tok) in columns.iter_mut().zip(&tokens) {
            let v: f64 = tok.parse().map_err(|_| SignalError::Parse {
                row,
                token: tok.to_string(),
            })?;
            col.push(v);
        }
    }
    if columns.is_empty() {
        return Err(SignalError::Empty);
    }
    Ok(columns)
}

fn select_channels(
    mut columns: Vec<Vec<f64>>,
    channel_indices: (usize, usize),
    sample_rate: f64,
    source_id: &str,
) -> Result<RawRecording, SignalError> {
    let (a, b) = channel_indices;
    let ncols = columns.len();
    for idx in [a, b] {
        if idx >= ncols {
            return Err(SignalError::Argument(format!(
                "channel index {idx} out of range for {ncols} columns"
            )));
        }
    }
    let first = columns[a].clone();
    let second = std::mem::take(&mut columns[b]);
    RawRecording::new(
        sample_rate,
        vec![
            Channel {
                name: format!("col{a}"),
                samples: first,
            },
            Channel {
                name: format!("col{b}"),
                samples: second,
            },
        ],
        source_id,
    )
}

/// Reads an IMS dataset-1 ASCII file (tab or space separated, one row per
/// sample instant) and keeps the two requested columns.
pub fn ingest_ims(
    file_bytes: &[u8],
    channel_indices: (usize, usize),
) -> Result<RawRecording, SignalError> {
    let text = std::str::from_utf8(file_bytes).map_err(|_| SignalError::NotText)?;
    let columns = parse_rows(text, false, |l| l.split_whitespace().collect())?;
    select_channels(columns, channel_indices, IMS_SAMPLE_RATE, "ims")
}

/// Reads comma- (or whitespace-) separated rows with the IMS row convention.
pub fn ingest_csv(
    file_bytes: &[u8],
    channel_indices: (usize, usize),
    skip_header: bool,
    sample_rate: f64,
) -> Result<RawRecording, SignalError> {
    let text = std::str::from_utf8(file_bytes).map_err(|_| SignalError::NotText)?;
    let columns = parse_rows(text, skip_header, |l| {
        if l.contains(',') {
            l.split(',').map(str::trim).collect()
        } else {
            l.split_whitespace().collect()
        }
    })?;
    select_channels(columns, channel_indices, sample_rate, "csv")
}

/// A 2-channel window of `len` samples, the classifier's input unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    pub samples: FeatureMaps<T>,
    pub label: Option<Severity>,
    pub normalized: bool,
}

impl<T: Scalar> Frame<T> {
    pub fn new(samples: FeatureMaps<T>, label: Option<Severity>) -> Self {
        Self {
            samples,
            label,
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.neurons()
    }

    pub fn with_label(mut self, label: Severity) -> Self {
        self.label = Some(label);
        self
    }

    pub fn cast<U: Scalar>(&self) -> Frame<U> {
        Frame {
            samples: self.samples.cast(),
            label: self.label,
            normalized: self.normalized,
        }
    }
}

/// Cuts a 2-channel recording into non-overlapping frames; the trailing
/// remainder is discarded.
pub fn make_frames(rec: &RawRecording, frame_len: usize) -> Result<Vec<Frame<f64>>, SignalError> {
    if frame_len == 0 {
        return Err(SignalError::Argument("frame length must be at least 1".into()));
    }
    if rec.channels.len() != 2 {
        return Err(SignalError::Argument(format!(
            "expected 2 channels, recording has {}",
            rec.channels.len()
        )));
    }
    let n = rec.len() / frame_len;
    Ok((0..n)
        .map(|j| {
            let span = j * frame_len..(j + 1) * frame_len;
            let mut data = Vec::with_capacity(2 * frame_len);
            for ch in &rec.channels {
                data.extend_from_slice(&ch.samples[span.clone()]);
            }
            Frame::new(FeatureMaps::from_vec(2, frame_len, data), None)
        })
        .collect())
}

/// Z-scores one channel (population standard deviation) and rescales it so
/// that its largest magnitude is exactly 1. Zero-variance input maps to zeros.
pub fn normalize_channel<T: Scalar>(x: &[T]) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    let n: T = count(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    if var <= T::zero() {
        return vec![T::zero(); x.len()];
    }
    let std = var.sqrt();
    let z: Vec<T> = x.iter().map(|&v| (v - mean) / std).collect();
    let peak = z.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if peak <= T::zero() {
        return vec![T::zero(); x.len()];
    }
    z.into_iter()
        .map(|v| (v / peak).max(-T::one()).min(T::one()))
        .collect()
}

/// Normalizes every channel of a frame independently into [-1, 1].
pub fn normalize_frame<T: Scalar>(f: &Frame<T>) -> Result<Frame<T>, SignalError> {
    if f.normalized {
        return Err(SignalError::Argument("frame is already normalized".into()));
    }
    let len = f.len();
    let mut data = Vec::with_capacity(f.channels() * len);
    for c in 0..f.channels() {
        data.extend(normalize_channel(f.samples.row(c)));
    }
    Ok(Frame {
        samples: FeatureMaps::from_vec(f.channels(), len, data),
        label: f.label,
        normalized: true,
    })
}

/// Where a dataset frame came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source_id: String,
    pub frame_index: usize,
}

/// Labeled, normalized frames ready for training and evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    frames: Vec<Frame<f64>>,
    provenance: Vec<Provenance>,
    pub class_names: [String; NUM_CLASSES],
}

impl Default for Dataset {
    fn default() -> Self {
        Self::new()
    }
}

impl Dataset {
    pub fn new() -> Self {
        Self {
            frames: Vec::new(),
            provenance: Vec::new(),
            class_names: Severity::ALL.map(|c| c.name().to_string()),
        }
    }

    /// Adds a frame; it must be normalized and labeled.
    pub fn push(&mut self, frame: Frame<f64>, provenance: Provenance) -> Result<(), SignalError> {
        if !frame.normalized {
            return Err(SignalError::Argument("dataset frames must be normalized".into()));
        }
        if frame.label.is_none() {
            return Err(SignalError::Argument("dataset frames must be labeled".into()));
        }
        if let Some(first) = self.frames.first() {
            if first.samples.shape() != frame.samples.shape() {
                return Err(SignalError::Argument(format!(
                    "frame shape {:?} differs from dataset shape {:?}",
                    frame.samples.shape(),
                    first.samples.shape()
                )));
            }
        }
        self.frames.push(frame);
        self.provenance.push(provenance);
        Ok(())
    }

    /// Frames, normalizes and labels every full frame of a recording.
    pub fn add_recording(
        &mut self,
        rec: &RawRecording,
        label: Severity,
        frame_len: usize,
    ) -> Result<usize, SignalError> {
        let frames = make_frames(rec, frame_len)?;
        let n = frames.len();
        for (j, f) in frames.into_iter().enumerate() {
            let f = normalize_frame(&f)?.with_label(label);
            self.push(
                f,
                Provenance {
                    source_id: rec.source_id.clone(),
                    frame_index: j,
                },
            )?;
        }
        Ok(n)
    }

    pub fn frames(&self) -> &[Frame<f64>] {
        &self.frames
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn labels(&self) -> Vec<Severity> {
        self.frames.iter().filter_map(|f| f.label).collect()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for l in self.labels() {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Loads `<dir>/<class>/<file>` recordings, one sub-directory per class
    /// (named like [`Severity`]'s names or abbreviations). Files are read in
    /// name order; other sub-directories are an error.
    pub fn load_dir(dir: &Path, channel_indices: (usize, usize), frame_len: usize) -> Result<Self, SignalError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SignalError::Io { path, source }
        };
        let mut classes = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io(dir))? {
            let path = entry.map_err(io(dir))?.path();
            if !path.is_dir() {
                continue;
            }
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let class: Severity = name.parse().map_err(|_| {
                SignalError::Argument(format!("{}: directory does not name a class", path.display()))
            })?;
            classes.push((class, path));
        }
        if classes.is_empty() {
            return Err(SignalError::Argument(format!(
                "{}: no class sub-directories found",
                dir.display()
            )));
        }
        classes.sort();
        let mut ds = Self::new();
        for (class, path) in classes {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&path)
                .map_err(io(&path))?
                .map(|e| e.map(|e| e.path()).map_err(io(&path)))
                .collect::<Result<_, _>>()?;
            files.retain(|p| p.is_file());
            files.sort();
            for file in files {
                let rec = read_recording(&file, channel_indices)?;
                ds.add_recording(&rec, class, frame_len)?;
            }
        }
        Ok(ds)
    }
}

/// Reads one recording: `.csv` files with [`ingest_csv`] at the IMS rate,
/// anything else with [`ingest_ims`]. The source id is the file path.
pub fn read_recording(path: &Path, channel_indices: (usize, usize)) -> Result<RawRecording, SignalError> {
    let bytes = std::fs::read(path).map_err(|source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let parsed = if is_csv {
        ingest_csv(&bytes, channel_indices, false, IMS_SAMPLE_RATE)
    } else {
        ingest_ims(&bytes, channel_indices)
    };
    let mut rec = parsed.map_err(|e| SignalError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    })?;
    rec.source_id = path.display().to_string();
    Ok(rec)
}

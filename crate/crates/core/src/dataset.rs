//! On-disk dataset layouts and binary-task sample selection.
//!
//! * N-MNIST: `<root>/{Train,Test}/<digit>/*.bin`
//! * DVS Gestures: `<root>/trials_to_{train,test}.txt` listing `.aedat`
//!   recordings, each with a `<stem>_labels.csv` next to it
//! * text: `<root>/{train,test}/<class>/*.txt` in the `x y p t_us` format

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{
    decode_aedat, decode_nmnist, load_gesture_sample, parse_gesture_labels, parse_text_events, EventRecord,
    GESTURE_EXCLUDED_CLASS, GESTURE_HEIGHT, GESTURE_WIDTH, NMNIST_HEIGHT, NMNIST_WIDTH,
};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Nmnist,
    Gesture,
    Text,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Nmnist => "nmnist",
            Self::Gesture => "gesture",
            Self::Text => "text",
        }
    }

    /// Native sensor resolution; text datasets carry their own.
    pub fn sensor(self) -> Option<(u32, u32)> {
        match self {
            Self::Nmnist => Some((NMNIST_WIDTH, NMNIST_HEIGHT)),
            Self::Gesture => Some((GESTURE_WIDTH, GESTURE_HEIGHT)),
            Self::Text => None,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nmnist" | "n-mnist" => Ok(Self::Nmnist),
            "gesture" | "gestures" | "dvs-gesture" => Ok(Self::Gesture),
            "text" => Ok(Self::Text),
            _ => Err(Error::invalid("dataset.kind", format!("unknown dataset kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn dir_name(self, kind: DatasetKind) -> &'static str {
        match (kind, self) {
            (DatasetKind::Nmnist, Split::Train) => "Train",
            (DatasetKind::Nmnist, Split::Test) => "Test",
            (_, Split::Train) => "train",
            (_, Split::Test) => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Position of the class in the configured pair (0 or 1).
    pub label: usize,
    pub class_id: u32,
    /// File the events came from.
    pub source: PathBuf,
    pub events: Vec<EventRecord>,
}

/// A source file and the class to extract from it, before decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    label: usize,
    class_id: u32,
    path: PathBuf,
}

/// Loads up to `limit` samples of the two classes from one split.
///
/// Files are taken in name order and the two classes are interleaved
/// (a, b, a, b, ...), so any prefix of the result is close to balanced.
/// `skip` drops that many entries from the front of the interleaved list
/// first, which gives disjoint slices of one split.
pub fn load_pair(
    kind: DatasetKind,
    root: &Path,
    split: Split,
    classes: [u32; 2],
    skip: usize,
    limit: Option<usize>,
) -> Result<Vec<Sample>> {
    if classes[0] == classes[1] {
        return Err(Error::invalid("dataset.classes", "the two classes must differ"));
    }
    let per_class: Vec<Vec<Entry>> = classes
        .iter()
        .enumerate()
        .map(|(label, &class_id)| list_class(kind, root, split, class_id, label))
        .collect::<Result<_>>()?;
    for (entries, class_id) in per_class.iter().zip(classes) {
        if entries.is_empty() {
            return Err(Error::Dataset(format!(
                "{}: no {} samples of class {class_id} in the {} split",
                root.display(),
                kind,
                split.dir_name(kind)
            )));
        }
    }
    let interleaved = interleave(&per_class[0], &per_class[1]);
    let end = limit.map_or(interleaved.len(), |n| (skip + n).min(interleaved.len()));
    let chosen = interleaved.get(skip..end).unwrap_or(&[]);
    exec::map_collect(chosen, |e| decode_entry(kind, e))
        .into_iter()
        .collect()
}

fn interleave(a: &[Entry], b: &[Entry]) -> Vec<Entry> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    for i in 0..a.len().max(b.len()) {
        out.extend(a.get(i).cloned());
        out.extend(b.get(i).cloned());
    }
    out
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    Ok(files)
}

fn list_class(kind: DatasetKind, root: &Path, split: Split, class_id: u32, label: usize) -> Result<Vec<Entry>> {
    let entry = |path: PathBuf| Entry { label, class_id, path };
    match kind {
        DatasetKind::Nmnist | DatasetKind::Text => {
            let ext = if kind == DatasetKind::Nmnist { "bin" } else { "txt" };
            let dir = root.join(split.dir_name(kind)).join(class_id.to_string());
            Ok(sorted_files(&dir, ext)?.into_iter().map(entry).collect())
        }
        DatasetKind::Gesture => {
            if class_id == GESTURE_EXCLUDED_CLASS {
                return Err(Error::ExcludedClass(class_id));
            }
            let mut out = Vec::new();
            for rec in gesture_trials(root, split)? {
                let labels = read_to_string(&gesture_labels_path(&rec))?;
                if parse_gesture_labels(&labels)?.iter().any(|s| s.class_id == class_id) {
                    out.push(entry(rec));
                }
            }
            Ok(out)
        }
    }
}

fn gesture_trials(root: &Path, split: Split) -> Result<Vec<PathBuf>> {
    let list = root.join(format!("trials_to_{}.txt", split.dir_name(DatasetKind::Gesture)));
    Ok(read_to_string(&list)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| root.join(l))
        .collect())
}

fn gesture_labels_path(recording: &Path) -> PathBuf {
    let stem = recording.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    recording.with_file_name(format!("{stem}_labels.csv"))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn decode_entry(kind: DatasetKind, e: &Entry) -> Result<Sample> {
    let events = decode_file(kind, &e.path, Some(e.class_id))?;
    Ok(Sample {
        label: e.label,
        class_id: e.class_id,
        source: e.path.clone(),
        events,
    })
}

/// Decodes one sample file. For gesture recordings `class_id` selects the
/// labelled window(s); without it the whole recording is returned.
pub fn decode_file(kind: DatasetKind, path: &Path, class_id: Option<u32>) -> Result<Vec<EventRecord>> {
    let context = |err: Error| match err {
        Error::Io { .. } => err,
        other => Error::Dataset(format!("{}: {other}", path.display())),
    };
    match kind {
        DatasetKind::Nmnist => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_nmnist(&bytes).map_err(context)
        }
        DatasetKind::Text => parse_text_events(&read_to_string(path)?).map_err(context),
        DatasetKind::Gesture => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let events = decode_aedat(&bytes).map_err(context)?;
            match class_id {
                None => Ok(events),
                Some(c) => {
                    let labels = parse_gesture_labels(&read_to_string(&gesture_labels_path(path))?)?;
                    load_gesture_sample(&events, &labels, c)
                }
            }
        }
    }
}

/// Every class directory (or gesture class id) present in a split.
pub fn list_classes(kind: DatasetKind, root: &Path, split: Split) -> Result<Vec<u32>> {
    let mut classes = Vec::new();
    match kind {
        DatasetKind::Nmnist | DatasetKind::Text => {
            let dir = root.join(split.dir_name(kind));
            for d in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?.flatten() {
                if let Some(c) = d.file_name().to_str().and_then(|s| s.parse().ok()) {
                    if d.path().is_dir() {
                        classes.push(c);
                    }
                }
            }
        }
        DatasetKind::Gesture => {
            for rec in gesture_trials(root, split)? {
                let labels = parse_gesture_labels(&read_to_string(&gesture_labels_path(&rec))?)?;
                classes.extend(labels.iter().map(|s| s.class_id).filter(|&c| c != GESTURE_EXCLUDED_CLASS));
            }
        }
    }
    classes.sort_unstable();
    classes.dedup();
    Ok(classes)
}

/// Files of one class, for inspection.
pub fn class_files(kind: DatasetKind, root: &Path, split: Split, class_id: u32) -> Result<Vec<PathBuf>> {
    Ok(list_class(kind, root, split, class_id, 0)?
        .into_iter()
        .map(|e| e.path)
        .collect())
}

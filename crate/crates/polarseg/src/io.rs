//! JSON file formats for instances and candidates, with atomic writes.
//!
//! Instance files carry one flat `[x0, y0, x1, y1, ...]` polygon per entry,
//! the same convention as COCO polygon annotations, so real annotations
//! convert with a one-line transform. RLE-style and multi-polygon entries
//! are rejected outright rather than silently converted.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{AngleGrid, PolarInstance};
use crate::experiments::{Corpus, CorpusInstance, CorpusSource};
use crate::geometry::{Contour, Point};
use crate::postprocess::Candidate;

#[derive(Debug)]
pub enum FileError {
    /// Entry `id` violated the format; the reason says how.
    Parse {
        id: String,
        reason: String,
    },
    Io(std::io::Error),
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FileError::Parse { id, reason } => write!(f, "entry '{id}': {reason}"),
            FileError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FileError {}

impl From<std::io::Error> for FileError {
    fn from(e: std::io::Error) -> Self {
        FileError::Io(e)
    }
}

fn parse_err(id: &str, reason: impl fmt::Display) -> FileError {
    FileError::Parse {
        id: id.to_string(),
        reason: reason.to_string(),
    }
}

/// Write to a sibling temp file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// One entry of an instance file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    /// [height, width] in pixels.
    pub image_size: [usize; 2],
    /// Flat [x0, y0, x1, y1, ...], at least 3 points.
    pub polygon: Vec<f64>,
    #[serde(default)]
    pub category: u32,
}

/// One entry of a candidate file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub center: [f64; 2],
    pub rays: Vec<f64>,
    pub class_score: f64,
    pub centerness: f64,
    #[serde(default)]
    pub level: u32,
    #[serde(default)]
    pub category: u32,
}

/// Load a polygon instance file into a corpus. Invalid entries are rejected
/// with the offending id in the error; nothing is accepted partially.
pub fn load_instances(path: &Path) -> Result<Corpus, FileError> {
    let bytes = fs::read(path)?;
    let values: Vec<serde_json::Value> = serde_json::from_slice(&bytes)
        .map_err(|e| parse_err("<file>", format!("not a JSON array of objects: {e}")))?;

    let mut instances = Vec::with_capacity(values.len());
    let mut seen = std::collections::HashSet::new();
    for (index, value) in values.into_iter().enumerate() {
        let id = value
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_owned)
            .unwrap_or_else(|| format!("#{index}"));
        reject_unsupported_segmentation(&id, &value)?;
        let record: InstanceRecord =
            serde_json::from_value(value).map_err(|e| parse_err(&id, e))?;
        if !seen.insert(record.id.clone()) {
            return Err(parse_err(&record.id, "duplicate id"));
        }
        instances.push(instance_from_record(record)?);
    }
    Ok(Corpus {
        instances,
        source: CorpusSource::File,
    })
}

/// Multi-polygon lists and RLE objects cannot express a single outer
/// contour; refuse them with a pointed message instead of guessing.
fn reject_unsupported_segmentation(id: &str, value: &serde_json::Value) -> Result<(), FileError> {
    if let Some(polygon) = value.get("polygon") {
        if let Some(arr) = polygon.as_array() {
            if arr.first().is_some_and(|v| v.is_array()) {
                return Err(parse_err(
                    id,
                    "multi-polygon segmentation is not supported; provide one flat polygon",
                ));
            }
        }
        if polygon.is_object() {
            return Err(parse_err(
                id,
                "RLE segmentation is not supported; provide one flat polygon",
            ));
        }
    }
    Ok(())
}

fn instance_from_record(record: InstanceRecord) -> Result<CorpusInstance, FileError> {
    let id = record.id;
    if !record.polygon.len().is_multiple_of(2) {
        return Err(parse_err(&id, "polygon has an odd number of coordinates"));
    }
    if record.polygon.len() < 6 {
        return Err(parse_err(&id, "polygon needs at least 3 points"));
    }
    if record.polygon.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(&id, "polygon has non-finite coordinates"));
    }
    if record.image_size[0] == 0 || record.image_size[1] == 0 {
        return Err(parse_err(&id, "image_size must be at least 1x1"));
    }
    let points: Vec<Point> = record
        .polygon
        .chunks(2)
        .map(|xy| Point::new(xy[0], xy[1]))
        .collect();
    let contour = Contour::new(points).map_err(|e| parse_err(&id, e))?;
    Ok(CorpusInstance {
        id,
        contour,
        image_size: (record.image_size[1], record.image_size[0]),
        category: record.category,
    })
}

pub fn save_instances(records: &[InstanceRecord], path: &Path) -> Result<(), FileError> {
    let json = serde_json::to_vec_pretty(records).expect("records serialize");
    write_atomic(path, &json)?;
    Ok(())
}

pub fn instance_record(inst: &CorpusInstance) -> InstanceRecord {
    let mut polygon = Vec::with_capacity(inst.contour.len() * 2);
    for p in inst.contour.points() {
        polygon.push(p.x);
        polygon.push(p.y);
    }
    InstanceRecord {
        id: inst.id.clone(),
        image_size: [inst.image_size.1, inst.image_size.0],
        polygon,
        category: inst.category,
    }
}

pub fn load_candidates(path: &Path) -> Result<Vec<Candidate>, FileError> {
    let bytes = fs::read(path)?;
    let records: Vec<CandidateRecord> = serde_json::from_slice(&bytes)
        .map_err(|e| parse_err("<file>", format!("not a candidate file: {e}")))?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| candidate_from_record(r, &format!("#{i}")))
        .collect()
}

pub fn candidate_from_record(record: &CandidateRecord, id: &str) -> Result<Candidate, FileError> {
    let grid = AngleGrid::new(record.rays.len()).map_err(|e| parse_err(id, e))?;
    let instance = PolarInstance::new(
        Point::new(record.center[0], record.center[1]),
        grid,
        record.rays.clone(),
    )
    .map_err(|e| parse_err(id, e))?;
    Candidate::new(
        instance,
        record.class_score,
        record.centerness,
        record.level,
        record.category,
    )
    .map_err(|e| parse_err(id, e))
}

pub fn candidate_record(c: &Candidate) -> CandidateRecord {
    let center = c.instance.center();
    CandidateRecord {
        center: [center.x, center.y],
        rays: c.instance.rays().to_vec(),
        class_score: c.class_score,
        centerness: c.centerness,
        level: c.level,
        category: c.category,
    }
}

pub fn save_candidates(cands: &[Candidate], path: &Path) -> Result<(), FileError> {
    let records: Vec<CandidateRecord> = cands.iter().map(candidate_record).collect();
    let json = serde_json::to_vec_pretty(&records).expect("records serialize");
    write_atomic(path, &json)?;
    Ok(())
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polygon_area, Point, Polygon};

/// Where an annotation came from; decides how its sides are split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Ctw1500,
    Totaltext,
    #[default]
    Generic,
    Synthetic,
}

/// Points per CTW1500 polygon: 7 along the top, 7 along the bottom.
pub const CTW1500_POINTS: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct TextInstance {
    pub id: String,
    pub polygon: Polygon,
    pub transcript: Option<String>,
    pub source: Source,
}

impl TextInstance {
    /// Validates the polygon, its area and the per-source point count.
    pub fn new(id: impl Into<String>, points: Vec<Point>, transcript: Option<String>, source: Source) -> Result<Self> {
        let id = id.into();
        let polygon = Polygon::new(points).map_err(|e| Error::MalformedAnnotation(format!("{id}: {e}")))?;
        polygon_area(&polygon).map_err(|e| Error::MalformedAnnotation(format!("{id}: {e}")))?;
        if source == Source::Ctw1500 && polygon.len() != CTW1500_POINTS {
            return Err(Error::MalformedAnnotation(format!(
                "{id}: ctw1500 polygons have {CTW1500_POINTS} points, got {}",
                polygon.len()
            )));
        }
        Ok(Self { id, polygon, transcript, source })
    }
}

/// On-disk annotation layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `{"instances": [{"id", "points", "transcript", "source"}]}`
    GenericJson,
    /// One instance per line: 28 comma-separated coordinates, optionally
    /// followed by `####transcript`.
    Ctw1500,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" | "generic" => Ok(Format::GenericJson),
            "ctw1500" | "ctw" => Ok(Format::Ctw1500),
            other => Err(Error::Config(format!("unknown annotation format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceJson {
    id: String,
    points: Vec<Point>,
    #[serde(default)]
    transcript: Option<String>,
    #[serde(default)]
    source: Source,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusJson {
    instances: Vec<InstanceJson>,
}

/// Valid instances plus one warning per rejected record.
#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub instances: Vec<TextInstance>,
    pub warnings: Vec<String>,
}

impl ParsedCorpus {
    fn finish(self) -> Result<Self> {
        if self.instances.is_empty() {
            Err(Error::EmptyCorpus)
        } else {
            Ok(self)
        }
    }
}

pub fn parse_generic_json(text: &str) -> Result<ParsedCorpus> {
    let raw: CorpusJson = serde_json::from_str(text)?;
    let mut out = ParsedCorpus::default();
    for inst in raw.instances {
        match TextInstance::new(inst.id, inst.points, inst.transcript, inst.source) {
            Ok(i) => out.instances.push(i),
            Err(e) => out.warnings.push(e.to_string()),
        }
    }
    out.finish()
}

/// Parses CTW1500 text; ids are `{prefix}_{line}` with 0-based line numbers.
pub fn parse_ctw1500(text: &str, prefix: &str) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let id = format!("{prefix}_{ln}");
        let (coords, transcript) = match line.split_once("####") {
            Some((c, t)) => (c, Some(t.to_string())),
            None => (line, None),
        };
        let nums: std::result::Result<Vec<f64>, _> = coords
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let nums = match nums {
            Ok(n) if n.len() == 2 * CTW1500_POINTS => n,
            Ok(n) => {
                out.warnings.push(format!("{id}: expected {} coordinates, got {}", 2 * CTW1500_POINTS, n.len()));
                continue;
            }
            Err(e) => {
                out.warnings.push(format!("{id}: {e}"));
                continue;
            }
        };
        let pts = nums.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
        match TextInstance::new(id, pts, transcript, Source::Ctw1500) {
            Ok(i) => out.instances.push(i),
            Err(e) => out.warnings.push(e.to_string()),
        }
    }
    out.finish()
}

/// Reads and validates an annotation file.
pub fn parse_annotations(path: impl AsRef<Path>, format: Format) -> Result<ParsedCorpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    match format {
        Format::GenericJson => parse_generic_json(&text),
        Format::Ctw1500 => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("ctw");
            parse_ctw1500(&text, stem)
        }
    }
}

/// Serializes instances in the generic JSON layout.
pub fn to_generic_json(instances: &[TextInstance]) -> Result<String> {
    let raw = CorpusJson {
        instances: instances
            .iter()
            .map(|i| InstanceJson {
                id: i.id.clone(),
                points: i.polygon.points().to_vec(),
                transcript: i.transcript.clone(),
                source: i.source,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

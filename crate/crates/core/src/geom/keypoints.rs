use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current on-disk format version of keypoint files.
pub const KEYPOINT_FILE_VERSION: u32 = 1;

/// Where a keypoint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Provenance {
    SeedJaw,
    SeedNose,
    /// Centroid inserted in the given sampling round (1-based).
    Centroid(u32),
    Manual,
}

impl Provenance {
    pub fn is_manual(self) -> bool {
        self == Provenance::Manual
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let centroid;
        f.pad(match self {
            Provenance::SeedJaw => "seed-jaw",
            Provenance::SeedNose => "seed-nose",
            Provenance::Centroid(k) => {
                centroid = format!("centroid-iter{k}");
                &centroid
            }
            Provenance::Manual => "manual",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "seed-jaw" => Ok(Provenance::SeedJaw),
            "seed-nose" => Ok(Provenance::SeedNose),
            "manual" => Ok(Provenance::Manual),
            _ => s
                .strip_prefix("centroid-iter")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|&k| k >= 1)
                .map(Provenance::Centroid)
                .ok_or_else(|| format!("unknown provenance tag {s:?}")),
        }
    }
}

impl TryFrom<String> for Provenance {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Provenance> for String {
    fn from(p: Provenance) -> String {
        p.to_string()
    }
}

/// Ordered template-vertex indices with a left/right mirror table.
///
/// `version` is an edit counter bumped on every accepted save; the on-disk
/// schema version is [`KEYPOINT_FILE_VERSION`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeypointSet {
    #[serde(default)]
    pub format_version: u32,
    pub version: u64,
    pub template_vertex_count: usize,
    indices: Vec<usize>,
    mirror: Vec<usize>,
    provenance: Vec<Provenance>,
}

impl KeypointSet {
    /// A set with every keypoint self-mirrored.
    pub fn new(indices: Vec<usize>, provenance: Vec<Provenance>, template_vertex_count: usize) -> Result<Self> {
        let mirror = (0..indices.len()).collect();
        Self::with_mirror(indices, mirror, provenance, template_vertex_count)
    }

    pub fn with_mirror(
        indices: Vec<usize>,
        mirror: Vec<usize>,
        provenance: Vec<Provenance>,
        template_vertex_count: usize,
    ) -> Result<Self> {
        let set = Self {
            format_version: KEYPOINT_FILE_VERSION,
            version: 0,
            template_vertex_count,
            indices,
            mirror,
            provenance,
        };
        set.validate()?;
        Ok(set)
    }

    /// Checks every structural invariant; the error names the one violated.
    pub fn validate(&self) -> Result<()> {
        let n = self.indices.len();
        if self.mirror.len() != n || self.provenance.len() != n {
            return Err(Error::Invariant(format!(
                "lengths agree: {n} indices, {} mirror entries, {} provenance tags",
                self.mirror.len(),
                self.provenance.len()
            )));
        }
        if let Some((ordinal, &idx)) = self.indices.iter().enumerate().find(|(_, &i)| i >= self.template_vertex_count) {
            return Err(Error::Invariant(format!(
                "index in range: keypoint {ordinal} has vertex {idx}, template has {}",
                self.template_vertex_count
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for (ordinal, &idx) in self.indices.iter().enumerate() {
            if !seen.insert(idx) {
                return Err(Error::Invariant(format!("indices unique: vertex {idx} repeated at keypoint {ordinal}")));
            }
        }
        for (i, &j) in self.mirror.iter().enumerate() {
            if j >= n || self.mirror[j] != i {
                return Err(Error::Invariant(format!("mirror is an involution: mirror[{i}] = {j} does not map back")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn mirror(&self) -> &[usize] {
        &self.mirror
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn set_mirror(&mut self, mirror: Vec<usize>) -> Result<()> {
        let old = std::mem::replace(&mut self.mirror, mirror);
        if let Err(e) = self.validate() {
            self.mirror = old;
            return Err(e);
        }
        Ok(())
    }

    /// Count of keypoints per provenance tag, sorted by tag.
    pub fn provenance_counts(&self) -> Vec<(Provenance, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for p in &self.provenance {
            *counts.entry(*p).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("keypoint set serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set = Self::from_json(&text).map_err(|e| Error::parse(path, e))?;
        if set.format_version > KEYPOINT_FILE_VERSION {
            return Err(Error::parse(path, format!("unsupported keypoint file version {}", set.format_version)));
        }
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

//! Ground-truth dataset assembly: landmark extraction from position maps,
//! horizontal-flip augmentation and the JSON Lines manifest.
//!
//! Input directories hold `<id>.jpg` (or `.jpeg`/`.png`) next to `<id>.npy`
//! position maps, with optional `<id>.mask.npy` validity masks and
//! `<id>.meta.json` metadata (`yaw`, `imageWidth`, `bbox`). Images are only
//! referenced, never decoded.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::YawBins;
use crate::geom::{extract_landmarks, BoundingBox, KeypointSet, LandmarkSet, Sampling, Schema, UvPositionMap};
use crate::npy;
use crate::template::FaceTemplate;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SUMMARY_FILE: &str = "dataset.json";
const FLIP_SUFFIX: &str = "_flip";
const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

/// Optional per-sample metadata read from `<id>.meta.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleMeta {
    pub yaw: Option<f64>,
    pub image_width: Option<usize>,
    pub bbox: Option<BoundingBox>,
}

/// One dataset entry held in memory, position map included.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image_path: PathBuf,
    pub posmap_path: PathBuf,
    pub yaw_degrees: Option<f64>,
    pub image_width: usize,
    pub bbox: Option<BoundingBox>,
    pub landmarks68: LandmarkSet,
    pub landmarks520: LandmarkSet,
    pub posmap: UvPositionMap,
    pub flipped: bool,
}

fn check_yaw(yaw: Option<f64>) -> Result<()> {
    match yaw {
        Some(y) if !(-180.0..=180.0).contains(&y) => Err(Error::Domain(format!("yaw {y} outside [-180, 180] degrees"))),
        _ => Ok(()),
    }
}

/// Extracts 68- and 520-point ground truth from one position map.
pub fn ingest_sample(
    id: &str,
    image_path: &Path,
    posmap_path: &Path,
    meta: &SampleMeta,
    template: &FaceTemplate,
    keys: &KeypointSet,
) -> Result<Sample> {
    if keys.len() != 520 {
        return Err(Error::Precondition(format!("keypoint set has {} entries, need 520", keys.len())));
    }
    check_yaw(meta.yaw)?;
    let mut posmap = npy::read_position_map(posmap_path)?;
    let mask_path = sibling(posmap_path, ".mask.npy");
    if mask_path.exists() {
        let (h, w, mask) = npy::read_mask(&mask_path)?;
        if (h, w) != (posmap.height(), posmap.width()) {
            return Err(Error::Shape(format!(
                "{}: mask is {h}x{w}, position map is {}x{}",
                mask_path.display(),
                posmap.height(),
                posmap.width()
            )));
        }
        posmap = posmap.with_mask(mask)?;
    }
    let extract = |k: &KeypointSet| {
        extract_landmarks(&posmap, &template.mesh, k, Sampling::Nearest).map_err(|e| match e {
            Error::KeypointLookup { .. } => Error::Domain(format!("{}: {e}", posmap_path.display())),
            e => e,
        })
    };
    let landmarks68 = extract(&template.landmarks68)?;
    let landmarks520 = extract(keys)?;
    Ok(Sample {
        id: id.to_string(),
        image_path: image_path.to_path_buf(),
        posmap_path: posmap_path.to_path_buf(),
        yaw_degrees: meta.yaw,
        image_width: meta.image_width.unwrap_or(posmap.width()),
        bbox: meta.bbox,
        landmarks68,
        landmarks520,
        posmap,
        flipped: false,
    })
}

/// Horizontal flip of an unflipped sample; see [`reflect`].
pub fn flip_sample(sample: &Sample, keys520: &KeypointSet, keys68: &KeypointSet) -> Result<Sample> {
    if sample.flipped {
        return Err(Error::Precondition(format!("sample {} is already flipped", sample.id)));
    }
    reflect(sample, keys520, keys68)
}

/// Mirrors a sample about the vertical image axis:
/// position-map columns reversed, `x -> (W - 1) - x` with `W` the image
/// width, landmarks permuted by the mirror tables so each index keeps its
/// semantic meaning, yaw negated and the `flipped` flag toggled.
///
/// Applying it twice restores the sample bit for bit whenever `(W - 1) - x`
/// is exact in `f64`, which holds for any coordinate read from `f32` data
/// of magnitude above `2^-20`.
pub fn reflect(sample: &Sample, keys520: &KeypointSet, keys68: &KeypointSet) -> Result<Sample> {
    let edge = sample.image_width as f64 - 1.0;
    let fx = move |p: [f64; 3]| [edge - p[0], p[1], p[2]];
    let permute = |l: &LandmarkSet, keys: &KeypointSet| -> Result<LandmarkSet> {
        if keys.len() != l.len() {
            return Err(Error::Shape(format!("mirror table of {} entries for {} landmarks", keys.len(), l.len())));
        }
        let pts = keys.mirror().iter().map(|&j| fx(l.points()[j])).collect();
        LandmarkSet::new(pts, l.schema())
    };
    Ok(Sample {
        id: flipped_id(&sample.id, !sample.flipped),
        image_path: sample.image_path.clone(),
        posmap_path: sample.posmap_path.clone(),
        yaw_degrees: sample.yaw_degrees.map(|y| -y),
        image_width: sample.image_width,
        bbox: sample.bbox.map(|b| BoundingBox { x0: edge - (b.x0 + b.w), ..b }),
        landmarks68: permute(&sample.landmarks68, keys68)?,
        landmarks520: permute(&sample.landmarks520, keys520)?,
        posmap: sample.posmap.mirrored_columns().map_values(fx),
        flipped: !sample.flipped,
    })
}

fn flipped_id(id: &str, flipped: bool) -> String {
    match (flipped, id.strip_suffix(FLIP_SUFFIX)) {
        (true, _) => format!("{id}{FLIP_SUFFIX}"),
        (false, Some(base)) => base.to_string(),
        (false, None) => id.to_string(),
    }
}

/// One manifest line. Relative paths resolve against the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleRecord {
    pub id: String,
    pub image: PathBuf,
    pub posmap: PathBuf,
    pub yaw: Option<f64>,
    pub flipped: bool,
    pub image_width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    /// Landmark files keyed by schema cardinality ("68", "520", ...).
    pub landmarks: BTreeMap<String, PathBuf>,
}

impl SampleRecord {
    pub fn landmark_path(&self, schema: Schema) -> Option<&Path> {
        self.landmarks.get(&schema.to_string()).map(PathBuf::as_path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetSummary {
    pub keypoint_set_version: String,
    pub pairs: usize,
    pub records: usize,
    pub augmented: bool,
    /// Record counts per yaw bin label, plus `"unknown"` for missing yaw and
    /// `"outside"` for yaw beyond the last bin.
    pub yaw_bins: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dir: PathBuf,
    pub records: Vec<SampleRecord>,
    pub summary: DatasetSummary,
    /// Orphan files skipped while scanning.
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    /// Reads `manifest.jsonl` (and `dataset.json` when present).
    pub fn load(path: &Path) -> Result<Self> {
        let (dir, file) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST_FILE))
        } else {
            (path.parent().map(Path::to_path_buf).unwrap_or_default(), path.to_path_buf())
        };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<SampleRecord>(l).map_err(|e| Error::parse(&file, format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut seen = BTreeSet::new();
        if let Some(r) = records.iter().find(|r| !seen.insert(r.id.as_str())) {
            return Err(Error::parse(&file, format!("duplicate record id {}", r.id)));
        }
        let summary_path = dir.join(SUMMARY_FILE);
        let summary = if summary_path.exists() {
            let s = std::fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
            serde_json::from_str(&s).map_err(|e| Error::parse(&summary_path, e))?
        } else {
            summarize(&records, "unknown".into(), records.len(), false)
        };
        Ok(Self { dir, records, summary, warnings: Vec::new() })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Ground-truth landmarks of a record under a schema.
    pub fn load_landmarks(&self, record: &SampleRecord, schema: Schema) -> Result<LandmarkSet> {
        let rel = record
            .landmark_path(schema)
            .ok_or_else(|| Error::Domain(format!("record {} has no {schema}-point landmarks", record.id)))?;
        let l = npy::read_landmarks(&self.resolve(rel))?;
        if l.schema() != schema {
            return Err(Error::Shape(format!(
                "record {}: expected {schema} landmarks, file holds {}",
                record.id,
                l.len()
            )));
        }
        Ok(l)
    }
}

/// A paired input found by [`scan_pairs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPair {
    pub id: String,
    pub image: PathBuf,
    pub posmap: PathBuf,
    pub meta: Option<PathBuf>,
}

/// Pairs images with position maps by file stem, sorted by id. Unpaired
/// files are returned as warnings.
pub fn scan_pairs(dir: &Path) -> Result<(Vec<InputPair>, Vec<String>)> {
    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut posmaps: BTreeMap<String, PathBuf> = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_owned) else { continue };
        if !path.is_file() || name.ends_with(".mask.npy") || name.ends_with(".meta.json") {
            continue;
        }
        let Some((stem, ext)) = name.rsplit_once('.') else { continue };
        if ext == "npy" {
            posmaps.insert(stem.to_string(), path.clone());
        } else if IMAGE_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
            if let Some(prev) = images.insert(stem.to_string(), path.clone()) {
                let keep = prev.min(path);
                images.insert(stem.to_string(), keep);
            }
        }
    }
    let mut warnings = Vec::new();
    let mut pairs = Vec::new();
    for (id, image) in &images {
        match posmaps.get(id) {
            Some(posmap) => {
                let meta = dir.join(format!("{id}.meta.json"));
                pairs.push(InputPair {
                    id: id.clone(),
                    image: image.clone(),
                    posmap: posmap.clone(),
                    meta: meta.exists().then_some(meta),
                });
            }
            None => warnings.push(format!("orphan image {} (no {id}.npy)", image.display())),
        }
    }
    for (id, posmap) in &posmaps {
        if !images.contains_key(id) {
            warnings.push(format!("orphan position map {} (no image)", posmap.display()));
        }
    }
    Ok((pairs, warnings))
}

fn read_meta(path: Option<&Path>) -> Result<SampleMeta> {
    let Some(path) = path else { return Ok(SampleMeta::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Identifier of a keypoint set: its edit counter and a hash of its indices.
pub fn keypoint_set_version(keys: &KeypointSet) -> String {
    // FNV-1a over the little-endian index bytes
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in keys.indices() {
        for b in (i as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("v{}-{h:016x}", keys.version)
}

/// Builds a dataset from `input_dir` into `out_dir`: landmark NPY files per
/// record, flipped position maps when augmenting, `manifest.jsonl` and
/// `dataset.json`. Records are sorted by id, each original followed by its
/// flip.
pub fn build_dataset(
    input_dir: &Path,
    template: &FaceTemplate,
    keys: &KeypointSet,
    augment: bool,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    keys.validate()?;
    let input_dir = input_dir.canonicalize().map_err(|e| Error::io(input_dir, e))?;
    let (pairs, warnings) = scan_pairs(&input_dir)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset(input_dir));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let per_pair: Vec<Vec<SampleRecord>> = pairs
        .par_iter()
        .map(|pair| {
            let meta = read_meta(pair.meta.as_deref())?;
            let sample = ingest_sample(&pair.id, &pair.image, &pair.posmap, &meta, template, keys)?;
            let mut out = vec![write_sample(&sample, out_dir, false)?];
            if augment {
                let flipped = flip_sample(&sample, keys, &template.landmarks68)?;
                out.push(write_sample(&flipped, out_dir, true)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let records: Vec<SampleRecord> = per_pair.into_iter().flatten().collect();
    let mut ids = BTreeSet::new();
    if let Some(r) = records.iter().find(|r| !ids.insert(r.id.clone())) {
        return Err(Error::Domain(format!("record id {} is not unique", r.id)));
    }

    let summary = summarize(&records, keypoint_set_version(keys), pairs.len(), augment);
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut body = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut body, r).expect("record serialises");
        body.push(b'\n');
    }
    std::fs::write(&manifest_path, body).map_err(|e| Error::io(&manifest_path, e))?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    let mut f = std::fs::File::create(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    serde_json::to_writer_pretty(&mut f, &summary).expect("summary serialises");
    f.write_all(b"\n").map_err(|e| Error::io(&summary_path, e))?;

    Ok(DatasetManifest { dir: out_dir.to_path_buf(), records, summary, warnings })
}

fn write_sample(sample: &Sample, out_dir: &Path, store_posmap: bool) -> Result<SampleRecord> {
    let mut landmarks = BTreeMap::new();
    for l in [&sample.landmarks68, &sample.landmarks520] {
        let name = format!("{}.lm{}.npy", sample.id, l.len());
        npy::write_landmarks(&out_dir.join(&name), l)?;
        landmarks.insert(l.len().to_string(), PathBuf::from(name));
    }
    let posmap = if store_posmap {
        let name = format!("{}.posmap.npy", sample.id);
        npy::write_position_map(&out_dir.join(&name), &sample.posmap)?;
        if let Some(mask) = sample.posmap.mask() {
            npy::write_mask(
                &out_dir.join(format!("{}.posmap.mask.npy", sample.id)),
                sample.posmap.height(),
                sample.posmap.width(),
                mask,
            )?;
        }
        PathBuf::from(name)
    } else {
        sample.posmap_path.clone()
    };
    Ok(SampleRecord {
        id: sample.id.clone(),
        image: sample.image_path.clone(),
        posmap,
        yaw: sample.yaw_degrees,
        flipped: sample.flipped,
        image_width: sample.image_width,
        bbox: sample.bbox,
        landmarks,
    })
}

fn summarize(records: &[SampleRecord], version: String, pairs: usize, augmented: bool) -> DatasetSummary {
    let bins = YawBins::default();
    let mut yaw_bins: BTreeMap<String, usize> = bins.labels().into_iter().map(|l| (l, 0)).collect();
    for r in records {
        let key = match r.yaw {
            None => "unknown".to_string(),
            Some(y) => bins.bin_of(y).map_or_else(|| "outside".to_string(), |b| bins.label(b)),
        };
        *yaw_bins.entry(key).or_insert(0) += 1;
    }
    DatasetSummary { keypoint_set_version: version, pairs, records: records.len(), augmented, yaw_bins }
}

/// Sibling path with a new suffix replacing the extension: `a/x.npy` ->
/// `a/x<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

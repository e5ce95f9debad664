use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::volume::{check_clip_file, load_clip, ClipVolume};
use crate::error::{invalid, Result, SkidError};
use crate::plane::Plane;
use crate::rng::seeded;

/// Environment variable consulted for the dataset root when none is given.
pub const DATA_ROOT_ENV: &str = "SKID_DATA_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = SkidError;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSchema {
    /// `clip_id,abnormal,acl,meniscus`
    Mrnet3,
    /// `clip_id,ligament_state`, with only complete rupture (2) positive.
    KneemriBinary,
    /// `clip_id,ligament_state` kept as 0 / 1 / 2.
    KneemriTernary,
}

impl LabelSchema {
    pub fn n_labels(self) -> usize {
        match self {
            LabelSchema::Mrnet3 => 3,
            _ => 1,
        }
    }

    pub fn label_names(self) -> Vec<&'static str> {
        match self {
            LabelSchema::Mrnet3 => crate::LABEL_NAMES.to_vec(),
            LabelSchema::KneemriBinary => vec!["rupture"],
            LabelSchema::KneemriTernary => vec!["ligament_state"],
        }
    }

    fn header(self) -> Vec<&'static str> {
        match self {
            LabelSchema::Mrnet3 => vec!["clip_id", "abnormal", "acl", "meniscus"],
            _ => vec!["clip_id", "ligament_state"],
        }
    }
}

impl FromStr for LabelSchema {
    type Err = SkidError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mrnet3" | "mrnet" => Ok(LabelSchema::Mrnet3),
            "kneemri_binary" => Ok(LabelSchema::KneemriBinary),
            "kneemri_ternary" => Ok(LabelSchema::KneemriTernary),
            other => Err(invalid(format!("unknown label schema `{other}`"))),
        }
    }
}

/// Maps a KneeMRI ligament state to the binary rupture label.
pub fn kneemri_binary(state: u8) -> u8 {
    u8::from(state == 2)
}

/// Parses a labels CSV into `(clip_id, labels)` rows in file order.
pub fn read_labels(path: impl AsRef<Path>, schema: LabelSchema) -> Result<Vec<(String, Vec<u8>)>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let want = schema.header();
    if header != want {
        return Err(SkidError::Parse {
            line: 1,
            msg: format!("{}: header {:?}, expected {:?}", path.display(), header, want),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let parse = |j: usize, max: u8| -> Result<u8> {
            let v: u8 = rec[j].parse().map_err(|_| SkidError::Parse {
                line,
                msg: format!("column {} value `{}` is not an integer", want[j], &rec[j]),
            })?;
            if v > max {
                return Err(SkidError::Parse {
                    line,
                    msg: format!("column {} value {v} exceeds {max}", want[j]),
                });
            }
            Ok(v)
        };
        let labels = match schema {
            LabelSchema::Mrnet3 => vec![parse(1, 1)?, parse(2, 1)?, parse(3, 1)?],
            LabelSchema::KneemriBinary => vec![kneemri_binary(parse(1, 2)?)],
            LabelSchema::KneemriTernary => vec![parse(1, 2)?],
        };
        rows.push((rec[0].to_string(), labels));
    }
    Ok(rows)
}

/// Writes MRNet-style (3 columns) or KneeMRI-style (1 column) labels.
pub fn write_labels(path: impl AsRef<Path>, schema: LabelSchema, rows: &[(String, Vec<u8>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(schema.header())?;
    for (id, labels) in rows {
        if labels.len() != schema.n_labels() {
            return Err(invalid(format!("clip {id}: {} labels for schema {schema:?}", labels.len())));
        }
        let mut rec = vec![id.clone()];
        rec.extend(labels.iter().map(|l| l.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| SkidError::Io(e.into_error()))?;
    crate::io_util::write_atomic(path.as_ref(), &bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    pub labels: Vec<u8>,
    pub paths: BTreeMap<Plane, PathBuf>,
}

impl ClipEntry {
    pub fn path(&self, plane: Plane) -> Result<&Path> {
        self.paths
            .get(&plane)
            .map(|p| p.as_path())
            .ok_or_else(|| SkidError::Data(format!("clip {} has no {plane} volume", self.clip_id)))
    }
}

/// One split of a dataset: `root/<split>/labels.csv` plus
/// `root/<split>/<plane>/<clip_id>.skidvol`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: Split,
    pub schema: LabelSchema,
    pub planes: Vec<Plane>,
    pub entries: Vec<ClipEntry>,
}

pub fn clip_path(root: &Path, split: Split, plane: Plane, clip_id: &str) -> PathBuf {
    root.join(split.as_str()).join(plane.as_str()).join(format!("{clip_id}.skidvol"))
}

pub fn labels_path(root: &Path, split: Split) -> PathBuf {
    root.join(split.as_str()).join("labels.csv")
}

/// Resolves an explicit root or falls back to the environment variable.
pub fn resolve_data_root(explicit: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    std::env::var_os(DATA_ROOT_ENV)
        .map(PathBuf::from)
        .ok_or_else(|| invalid(format!("no dataset root given and {DATA_ROOT_ENV} is unset")))
}

impl DatasetManifest {
    /// Reads the labels and checks every referenced volume's header before
    /// returning; all problems are reported together.
    pub fn load(root: impl AsRef<Path>, split: Split, schema: LabelSchema, planes: &[Plane]) -> Result<Self> {
        let root = root.as_ref();
        if planes.is_empty() {
            return Err(invalid("at least one plane is required"));
        }
        let rows = read_labels(labels_path(root, split), schema)?;
        let mut seen = HashSet::new();
        let mut problems = Vec::new();
        let mut entries = Vec::with_capacity(rows.len());
        for (clip_id, labels) in rows {
            if !seen.insert(clip_id.clone()) {
                problems.push(format!("duplicate clip id {clip_id}"));
                continue;
            }
            let mut paths = BTreeMap::new();
            for &plane in planes {
                let p = clip_path(root, split, plane, &clip_id);
                match check_clip_file(&p) {
                    Ok(h) if h.height != h.width => {
                        problems.push(format!("{}: frames are {}x{}, not square", p.display(), h.height, h.width))
                    }
                    Ok(_) => {}
                    Err(e) => problems.push(format!("{}: {e}", p.display())),
                }
                paths.insert(plane, p);
            }
            entries.push(ClipEntry { clip_id, labels, paths });
        }
        if !problems.is_empty() {
            let shown: Vec<_> = problems.iter().take(20).cloned().collect();
            return Err(SkidError::Data(format!(
                "{} problem(s) in {} split:\n  {}{}",
                problems.len(),
                split,
                shown.join("\n  "),
                if problems.len() > 20 { "\n  ..." } else { "" }
            )));
        }
        if entries.is_empty() {
            return Err(SkidError::Data(format!("{split} split under {} is empty", root.display())));
        }
        Ok(DatasetManifest {
            root: root.to_path_buf(),
            split,
            schema,
            planes: planes.to_vec(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.schema.n_labels()
    }

    /// Positive count per label.
    pub fn positives(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_labels()];
        for e in &self.entries {
            for (o, &l) in out.iter_mut().zip(&e.labels) {
                *o += usize::from(l > 0);
            }
        }
        out
    }

    pub fn load_volume(&self, index: usize, plane: Plane) -> Result<ClipVolume> {
        let e = &self.entries[index];
        let mut v = load_clip(e.path(plane)?)?;
        v.clip_id = e.clip_id.clone();
        v.plane = plane;
        v.labels = e.labels.clone();
        Ok(v)
    }

    pub fn load_all(&self, plane: Plane) -> Result<Vec<ClipVolume>> {
        (0..self.len()).map(|i| self.load_volume(i, plane)).collect()
    }
}

/// Stratified clip-level subsample of `round(fraction · N)` clips. Strata are
/// the distinct label vectors; per-stratum quotas use largest remainders.
pub fn subset_for_label_efficiency(m: &DatasetManifest, fraction: f64, seed: u64) -> Result<DatasetManifest> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!("fraction {fraction} must lie in (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok(m.clone());
    }
    let mut strata: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for (i, e) in m.entries.iter().enumerate() {
        strata.entry(e.labels.clone()).or_default().push(i);
    }
    let target = (fraction * m.len() as f64).round() as usize;
    let exact: Vec<f64> = strata.values().map(|v| v.len() as f64 * fraction).collect();
    let mut quota: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rest = target.saturating_sub(quota.iter().sum());
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &s in &order {
        if rest == 0 {
            break;
        }
        quota[s] += 1;
        rest -= 1;
    }
    let mut rng = seeded(seed);
    let mut picked = Vec::with_capacity(target);
    for (members, q) in strata.values().zip(&quota) {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        picked.extend(members.into_iter().take(*q));
    }
    picked.sort_unstable();
    let sub = DatasetManifest {
        entries: picked.into_iter().map(|i| m.entries[i].clone()).collect(),
        ..m.clone()
    };
    let full = m.positives();
    let kept = sub.positives();
    for (j, (&f, &k)) in full.iter().zip(&kept).enumerate() {
        if f > 0 && k == 0 {
            let min = (0.5 / f as f64).max(1.0 / m.len() as f64);
            return Err(invalid(format!(
                "fraction {fraction} leaves no positives for label {}; use at least {min:.4}",
                m.schema.label_names()[j]
            )));
        }
    }
    Ok(sub)
}

/// Repeats minority-class entries (cycling in order) until the two classes
/// differ by at most one. Entries are shared references to the same files.
pub fn oversample_minority(m: &DatasetManifest) -> Result<DatasetManifest> {
    if m.schema != LabelSchema::KneemriBinary {
        return Err(invalid("oversampling needs the kneemri_binary schema"));
    }
    let pos: Vec<&ClipEntry> = m.entries.iter().filter(|e| e.labels[0] == 1).collect();
    let neg: Vec<&ClipEntry> = m.entries.iter().filter(|e| e.labels[0] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(invalid("oversampling needs both classes present"));
    }
    let (minority, major_n) = if pos.len() < neg.len() {
        (pos, neg.len())
    } else {
        (neg, pos.len())
    };
    let mut entries = m.entries.clone();
    let extra = major_n - minority.len();
    entries.extend(minority.iter().cycle().take(extra).map(|e| (*e).clone()));
    Ok(DatasetManifest { entries, ..m.clone() })
}

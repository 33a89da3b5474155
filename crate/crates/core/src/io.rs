//! Persistence: the native dataset text format, occupancy maps (text or
//! PGM), BIWI-style `obsmat` ingestion, and checksummed weight archives.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::autoencoder::Autoencoder;
use crate::error::{Error, Result};
use crate::geometry::{update_heading, AgentState, Dataset, Trajectory, Vec2, WorldMap};
use crate::predictor::{Predictor, PredictorConfig};
use crate::scalar::Scalar;
use crate::tensornn::{ParamSet, Tensor};

const DATASET_MAGIC: &str = "# pedpredict dataset v1";
const MAP_MAGIC: &str = "# pedpredict map v1";

fn parse_num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{field}'")))
}

// ---------------------------------------------------------------- datasets

/// Dataset rows plus the map reference from the header.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile<T> {
    pub dt: T,
    pub map: Option<String>,
    pub trajectories: Vec<Trajectory<T>>,
}

/// Render trajectories in the native text format. Numbers use the shortest
/// representation that parses back to the same value.
pub fn dataset_to_string<T: Scalar>(trajectories: &[Trajectory<T>], dt: T, map_ref: Option<&str>) -> String {
    let mut out = format!("{DATASET_MAGIC}\ndt {dt}\nmap {}\n", map_ref.unwrap_or("-"));
    out.push_str("# agent_id time_index x y vx vy heading\n");
    for t in trajectories {
        for (k, s) in t.samples.iter().enumerate() {
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                t.agent_id,
                t.start_index + k as i64,
                s.position.x,
                s.position.y,
                s.velocity.x,
                s.velocity.y,
                s.heading
            ));
        }
    }
    out
}

pub fn parse_dataset<T: Scalar>(text: &str) -> Result<DatasetFile<T>> {
    let mut dt = None;
    let mut map = None;
    let mut rows: BTreeMap<u64, Vec<(i64, AgentState<T>)>> = BTreeMap::new();
    let mut saw_magic = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l == DATASET_MAGIC {
            saw_magic = true;
            continue;
        }
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        match fields[0] {
            "dt" if fields.len() == 2 => dt = Some(parse_num::<T>(line, fields[1], "dt")?),
            "map" if fields.len() == 2 => map = (fields[1] != "-").then(|| fields[1].to_string()),
            _ if fields.len() == 7 => {
                let id: u64 = parse_num(line, fields[0], "agent id")?;
                let time: i64 = parse_num(line, fields[1], "time index")?;
                let v: Vec<T> = fields[2..]
                    .iter()
                    .map(|f| parse_num(line, f, "number"))
                    .collect::<Result<_>>()?;
                let state = AgentState::new(id, Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]), v[4]);
                rows.entry(id).or_default().push((time, state));
            }
            _ => return Err(Error::parse(line, format!("unexpected line '{l}'"))),
        }
    }
    if !saw_magic {
        return Err(Error::parse(1, "missing dataset header"));
    }
    let dt = dt.ok_or_else(|| Error::parse(1, "missing 'dt' header"))?;
    let mut trajectories = Vec::with_capacity(rows.len());
    for (id, mut samples) in rows {
        samples.sort_by_key(|&(t, _)| t);
        let start = samples[0].0;
        if samples.iter().enumerate().any(|(k, &(t, _))| t != start + k as i64) {
            return Err(Error::parse(0, format!("agent {id} has gaps or repeated time indices")));
        }
        trajectories.push(Trajectory {
            agent_id: id,
            start_index: start,
            samples: samples.into_iter().map(|(_, s)| s).collect(),
            dt,
        });
    }
    Ok(DatasetFile { dt, map, trajectories })
}

/// Write `dataset` to `path` and its map to `map_path`; the dataset header
/// references the map by its file name when both share a directory.
pub fn save_dataset<T: Scalar>(path: &Path, dataset: &Dataset<T>, map_path: &Path) -> Result<()> {
    save_map_text(map_path, &dataset.map)?;
    let reference = match (path.parent(), map_path.parent(), map_path.file_name()) {
        (Some(a), Some(b), Some(name)) if a == b => PathBuf::from(name),
        _ => map_path.to_path_buf(),
    };
    let text = dataset_to_string(&dataset.trajectories, dataset.dt, Some(&reference.to_string_lossy()));
    fs::write(path, text)?;
    Ok(())
}

/// Load a dataset and the map its header points to (relative references
/// resolve against the dataset's directory).
pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let file: DatasetFile<T> = parse_dataset(&fs::read_to_string(path)?)?;
    let reference = file
        .map
        .ok_or_else(|| Error::Config(format!("{} names no map", path.display())))?;
    let mut map_path = PathBuf::from(&reference);
    if map_path.is_relative() {
        if let Some(dir) = path.parent() {
            map_path = dir.join(map_path);
        }
    }
    let map = load_map(&map_path)?;
    Dataset::new(map, file.trajectories, file.dt)
}

// ---------------------------------------------------------------- maps

/// Text form: header lines, then one row of `0`/`1` per map row, the first
/// row being the top of the map (largest y).
pub fn map_to_string<T: Scalar>(map: &WorldMap<T>) -> String {
    let mut out = format!(
        "{MAP_MAGIC}\nresolution {}\norigin {} {}\n",
        map.resolution, map.origin.x, map.origin.y
    );
    for iy in (0..map.height).rev() {
        for ix in 0..map.width {
            out.push(if map.occupied(ix, iy) { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

fn map_header<T: Scalar>(key: &str, fields: &[&str], line: usize, res: &mut Option<T>, origin: &mut Option<Vec2<T>>) -> Result<bool> {
    match (key, fields.len()) {
        ("resolution", 2) => *res = Some(parse_num(line, fields[1], "resolution")?),
        ("origin", 3) => {
            *origin = Some(Vec2::new(
                parse_num(line, fields[1], "origin x")?,
                parse_num(line, fields[2], "origin y")?,
            ))
        }
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn parse_map_text<T: Scalar>(text: &str) -> Result<WorldMap<T>> {
    let mut res = None;
    let mut origin = None;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        if map_header(fields[0], &fields, line, &mut res, &mut origin)? {
            continue;
        }
        let row = l
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::parse(line, format!("unexpected map character '{c}'"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(line, format!("ragged row: {} cells, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    let res = res.ok_or_else(|| Error::parse(1, "missing 'resolution' header"))?;
    let origin = origin.ok_or_else(|| Error::parse(1, "missing 'origin' header"))?;
    cells_to_map(origin, res, rows)
}

fn cells_to_map<T: Scalar>(origin: Vec2<T>, res: T, rows_top_first: Vec<Vec<u8>>) -> Result<WorldMap<T>> {
    let height = rows_top_first.len();
    let width = rows_top_first.first().map_or(0, Vec::len);
    let cells = rows_top_first.into_iter().rev().flatten().collect();
    WorldMap::new(origin, res, width, height, cells)
}

/// Binary PGM (`P5`); free cells are white, occupied black. Resolution and
/// origin travel in header comments.
pub fn map_to_pgm<T: Scalar>(map: &WorldMap<T>) -> Vec<u8> {
    let mut out = format!(
        "P5\n# resolution {}\n# origin {} {}\n{} {}\n255\n",
        map.resolution, map.origin.x, map.origin.y, map.width, map.height
    )
    .into_bytes();
    for iy in (0..map.height).rev() {
        for ix in 0..map.width {
            out.push(if map.occupied(ix, iy) { 0 } else { 255 });
        }
    }
    out
}

/// Reads `P2` or `P5` gray images; values below 128 are occupied.
pub fn parse_pgm<T: Scalar>(bytes: &[u8]) -> Result<WorldMap<T>> {
    let mut res = None;
    let mut origin = None;
    let mut tokens: Vec<String> = Vec::new();
    let mut pos = 0;
    let mut line = 0;
    // Header: magic, width, height, maxval, with comments anywhere.
    while tokens.len() < 4 {
        if pos >= bytes.len() {
            return Err(Error::parse(line, "truncated PGM header"));
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
        let text = std::str::from_utf8(&bytes[pos..end]).map_err(|_| Error::parse(line, "non-text PGM header"))?;
        line += 1;
        pos = end + 1;
        let (body, comment) = text.split_once('#').unwrap_or((text, ""));
        let c: Vec<&str> = comment.split_whitespace().collect();
        if !c.is_empty() {
            map_header(c[0], &c, line, &mut res, &mut origin)?;
        }
        tokens.extend(body.split_whitespace().map(str::to_string));
    }
    let binary = match tokens[0].as_str() {
        "P5" => true,
        "P2" => false,
        m => return Err(Error::parse(1, format!("unsupported image type '{m}'"))),
    };
    let width: usize = parse_num(line, &tokens[1], "width")?;
    let height: usize = parse_num(line, &tokens[2], "height")?;
    let maxval: u32 = parse_num(line, &tokens[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse(line, "only 8-bit gray images are supported"));
    }
    let values: Vec<u32> = if binary {
        bytes.get(pos.min(bytes.len())..).unwrap_or(&[]).iter().map(|&b| b as u32).collect()
    } else {
        let rest = std::str::from_utf8(&bytes[pos.min(bytes.len())..]).map_err(|_| Error::parse(line, "non-text P2 body"))?;
        rest.lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .map(|v| parse_num(line, v, "pixel"))
            .collect::<Result<_>>()?
    };
    if values.len() < width * height {
        return Err(Error::parse(line, format!("expected {} pixels, found {}", width * height, values.len())));
    }
    let rows = values[..width * height]
        .chunks(width.max(1))
        .map(|r| r.iter().map(|&v| u8::from(v * 255 / maxval < 128)).collect())
        .collect();
    let res = res.unwrap_or_else(|| T::c(0.1));
    let origin = origin.unwrap_or_else(Vec2::zero);
    cells_to_map(origin, res, rows)
}

/// Load a map, choosing PGM or text by the file's first bytes.
pub fn load_map<T: Scalar>(path: &Path) -> Result<WorldMap<T>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        parse_pgm(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(1, "map file is not text"))?;
        parse_map_text(&text)
    }
}

pub fn save_map_text<T: Scalar>(path: &Path, map: &WorldMap<T>) -> Result<()> {
    fs::write(path, map_to_string(map))?;
    Ok(())
}

pub fn save_map_pgm<T: Scalar>(path: &Path, map: &WorldMap<T>) -> Result<()> {
    fs::write(path, map_to_pgm(map))?;
    Ok(())
}

// ---------------------------------------------------------------- obsmat

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsmatConfig {
    /// Frames per second of the annotation.
    pub frame_rate: f64,
    /// Period the trajectories are resampled to.
    pub dt: f64,
}

impl Default for ObsmatConfig {
    fn default() -> Self {
        Self { frame_rate: 2.5, dt: 0.3 }
    }
}

/// Parse `frame id pos_x pos_z pos_y v_x v_z v_y` rows, group them by agent
/// and resample each track to multiples of `config.dt` by linear
/// interpolation. Velocities are finite differences of the resampled
/// positions.
pub fn parse_obsmat<T: Scalar>(text: &str, config: &ObsmatConfig, map: WorldMap<T>) -> Result<Dataset<T>> {
    if !(config.frame_rate > 0.0 && config.dt > 0.0) {
        return Err(Error::Config("frame rate and dt must be positive".into()));
    }
    let mut tracks: BTreeMap<u64, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let f: Vec<f64> = l
            .split_whitespace()
            .map(|v| parse_num(line, v, "number"))
            .collect::<Result<_>>()?;
        if f.len() != 8 {
            return Err(Error::parse(line, format!("expected 8 columns, found {}", f.len())));
        }
        if f[1] < 0.0 || f[1].fract() != 0.0 {
            return Err(Error::parse(line, format!("invalid agent id {}", f[1])));
        }
        let time = f[0] / config.frame_rate;
        let track = tracks.entry(f[1] as u64).or_default();
        if track.last().is_some_and(|&(t, _, _)| time <= t) {
            return Err(Error::parse(line, format!("frames of agent {} are not increasing", f[1])));
        }
        track.push((time, f[2], f[4]));
    }
    let dt = config.dt;
    let mut trajectories = Vec::new();
    for (id, track) in tracks {
        let (t0, t1) = (track[0].0, track[track.len() - 1].0);
        let first = (t0 / dt - 1e-6).ceil() as i64;
        let last = (t1 / dt + 1e-6).floor() as i64;
        if last < first {
            continue;
        }
        let mut j = 0;
        let positions: Vec<Vec2<f64>> = (first..=last)
            .map(|n| {
                let t = (n as f64 * dt).clamp(t0, t1);
                while j + 1 < track.len() && track[j + 1].0 < t {
                    j += 1;
                }
                let (ta, xa, ya) = track[j];
                match track.get(j + 1) {
                    Some(&(tb, xb, yb)) if tb > ta => {
                        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
                        Vec2::new(xa + (xb - xa) * w, ya + (yb - ya) * w)
                    }
                    _ => Vec2::new(xa, ya),
                }
            })
            .collect();
        let mut samples = Vec::with_capacity(positions.len());
        let mut heading = 0.0;
        for k in 0..positions.len() {
            let v = match k {
                _ if positions.len() == 1 => Vec2::zero(),
                0 => (positions[1] - positions[0]) * (1.0 / dt),
                _ => (positions[k] - positions[k - 1]) * (1.0 / dt),
            };
            heading = update_heading(heading, v);
            let p = positions[k];
            samples.push(AgentState::new(
                id,
                Vec2::new(T::c(p.x), T::c(p.y)),
                Vec2::new(T::c(v.x), T::c(v.y)),
                T::c(heading),
            ));
        }
        trajectories.push(Trajectory {
            agent_id: id,
            start_index: first,
            samples,
            dt: T::c(dt),
        });
    }
    Dataset::new(map, trajectories, T::c(dt))
}

/// Render `dataset` as obsmat rows (z columns zero).
pub fn dataset_to_obsmat<T: Scalar>(dataset: &Dataset<T>, frame_rate: f64) -> String {
    let mut rows = Vec::new();
    for t in &dataset.trajectories {
        for (k, s) in t.samples.iter().enumerate() {
            let time = (t.start_index + k as i64) as f64 * dataset.dt.as_f64();
            rows.push((time * frame_rate, t.agent_id, s));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    rows.iter()
        .map(|(frame, id, s)| {
            format!(
                "{frame} {id} {} 0 {} {} 0 {}\n",
                s.position.x, s.position.y, s.velocity.x, s.velocity.y
            )
        })
        .collect()
}

// ---------------------------------------------------------------- weights

pub const ARCHIVE_VERSION: u32 = 1;
const ARCHIVE_MAGIC: &[u8; 4] = b"PPWA";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Named sections of tensors plus string metadata, stored as
/// length-prefixed little-endian binary followed by a SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightArchive {
    pub sections: BTreeMap<String, Vec<NamedTensor>>,
    pub metadata: BTreeMap<String, String>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Checksum)?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::parse(0, "archive string is not UTF-8"))
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl WeightArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store every tensor of `params` under `component`.
    pub fn insert_params<T: Scalar>(&mut self, component: &str, params: &ParamSet<T>) {
        let tensors = params
            .entries()
            .iter()
            .map(|e| NamedTensor {
                name: e.name.clone(),
                shape: e.tensor.shape().to_vec(),
                data: e.tensor.data().iter().map(|v| v.as_f64()).collect(),
            })
            .collect();
        self.sections.insert(component.to_string(), tensors);
    }

    /// Overwrite every tensor of `params` from section `component`.
    pub fn restore_params<T: Scalar>(&self, component: &str, params: &mut ParamSet<T>) -> Result<()> {
        let section = self
            .sections
            .get(component)
            .ok_or_else(|| Error::UnknownSection(component.to_string()))?;
        let by_name: BTreeMap<&str, &NamedTensor> = section.iter().map(|t| (t.name.as_str(), t)).collect();
        let names: Vec<String> = params.entries().iter().map(|e| e.name.clone()).collect();
        for name in names {
            let t = by_name
                .get(name.as_str())
                .ok_or_else(|| Error::UnknownSection(format!("{component}/{name}")))?;
            let data = t.data.iter().map(|&v| T::c(v)).collect();
            params.assign(&name, &Tensor::from_vec(&t.shape, data)?)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, tensors) in &self.sections {
            put_str(&mut out, name);
            out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
            for t in tensors {
                put_str(&mut out, &t.name);
                out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
                for &d in &t.shape {
                    out.extend_from_slice(&(d as u64).to_le_bytes());
                }
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(digest.as_slice());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < ARCHIVE_MAGIC.len() + 4 + 32 {
            return Err(Error::Checksum);
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checksum);
        }
        let mut r = Reader { bytes: body, pos: 0 };
        if r.take(4)? != ARCHIVE_MAGIC {
            return Err(Error::parse(0, "not a weight archive"));
        }
        let version = r.u32()?;
        if version != ARCHIVE_VERSION {
            return Err(Error::Version(version));
        }
        let mut archive = Self::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let count = r.u32()?;
            let mut tensors = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let tname = r.string()?;
                let ndim = r.u32()?;
                let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
                let len: usize = shape.iter().product();
                let data = (0..len).map(|_| r.u64().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
                tensors.push(NamedTensor { name: tname, shape, data });
            }
            archive.sections.insert(name, tensors);
        }
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            archive.metadata.insert(k, v);
        }
        if r.pos != body.len() {
            return Err(Error::parse(0, "trailing bytes in weight archive"));
        }
        Ok(archive)
    }
}

pub fn save_weights(path: &Path, archive: &WeightArchive) -> Result<()> {
    fs::write(path, archive.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<WeightArchive> {
    WeightArchive::from_bytes(&fs::read(path)?)
}

const AE_SECTION: &str = "ae";
const PREDICTOR_SECTION: &str = "predictor";
const PREDICTOR_CONFIG_KEY: &str = "predictor.config";

impl WeightArchive {
    pub fn insert_autoencoder<T: Scalar>(&mut self, ae: &Autoencoder<T>) {
        self.insert_params(AE_SECTION, &ae.params);
    }

    pub fn autoencoder<T: Scalar>(&self) -> Result<Autoencoder<T>> {
        let mut ae = Autoencoder::new(0);
        self.restore_params(AE_SECTION, &mut ae.params)?;
        Ok(ae)
    }

    pub fn insert_predictor<T: Scalar>(&mut self, model: &Predictor<T>) {
        self.insert_params(PREDICTOR_SECTION, &model.params);
        self.metadata.insert(
            PREDICTOR_CONFIG_KEY.into(),
            serde_json::to_string(&model.config).expect("config serializes"),
        );
    }

    pub fn predictor<T: Scalar>(&self) -> Result<Predictor<T>> {
        let config: PredictorConfig = self
            .metadata
            .get(PREDICTOR_CONFIG_KEY)
            .ok_or_else(|| Error::UnknownSection(PREDICTOR_CONFIG_KEY.into()))
            .and_then(|s| serde_json::from_str(s).map_err(|e| Error::parse(0, e.to_string())))?;
        // The placeholder only shapes the grid channel; every tensor is
        // overwritten from the archive.
        let placeholder = Autoencoder::new(0);
        let mut model = Predictor::new(config, Some(&placeholder), 0)?;
        self.restore_params(PREDICTOR_SECTION, &mut model.params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_text_examples() {
        let m: WorldMap<f64> = parse_map_text("resolution 0.5\norigin 1 2\n000\n000\n000\n").unwrap();
        assert_eq!((m.width, m.height), (3, 3));
        assert!(m.cells.iter().all(|&c| c == 0));
        let m: WorldMap<f64> = parse_map_text("resolution 0.5\norigin 0 0\n001\n000\n000\n").unwrap();
        assert_eq!(m.cells.iter().filter(|&&c| c == 1).count(), 1);
        // Row 0 of the text is the top row of the map.
        assert!(m.occupied(2, 2));
        assert!(parse_map_text::<f64>("origin 0 0\n01\n").is_err());
        assert!(parse_map_text::<f64>("resolution 1\norigin 0 0\n01\n0\n").is_err());
    }

    #[test]
    fn obsmat_two_rows() {
        let text = "0 7 0 0 0 0 0 0\n0.75 7 0.3 0 0 0 0 0\n";
        let map = WorldMap::empty(Vec2::zero(), 0.1, 10, 10);
        let ds: Dataset<f64> = parse_obsmat(text, &ObsmatConfig::default(), map.clone()).unwrap();
        assert_eq!(ds.trajectories.len(), 1);
        let t = &ds.trajectories[0];
        assert_eq!(t.len(), 2);
        assert!((t.samples[1].velocity.x - 1.0).abs() < 1e-9 && t.samples[1].velocity.y.abs() < 1e-12);
        let empty: Dataset<f64> = parse_obsmat("", &ObsmatConfig::default(), map.clone()).unwrap();
        assert!(empty.trajectories.is_empty());
        assert!(parse_obsmat::<f64>("1 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n", &ObsmatConfig::default(), map.clone()).is_err());
        assert!(parse_obsmat::<f64>("1 0 0 0\n", &ObsmatConfig::default(), map).is_err());
    }

    #[test]
    fn truncated_archive_fails_checksum() {
        let mut a = WeightArchive::new();
        a.sections.insert(
            "x".into(),
            vec![NamedTensor {
                name: "w".into(),
                shape: vec![2],
                data: vec![1.0, -0.5],
            }],
        );
        let bytes = a.to_bytes();
        assert_eq!(WeightArchive::from_bytes(&bytes).unwrap(), a);
        assert!(matches!(WeightArchive::from_bytes(&bytes[..bytes.len() - 5]), Err(Error::Checksum)));
    }
}

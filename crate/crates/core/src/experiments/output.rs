//! Result files: `results.csv`, per-run history CSVs, profile snapshots, the
//! run manifest and `timings.csv`.
//!
//! Files are first written with an `.incomplete` suffix and renamed only when
//! the scenario finished; an aborted scenario leaves the suffixed files behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ScenarioConfig, SnapshotFormat};
use crate::error::{Error, Result};
use crate::grid::{Profile, RadialGrid};

pub const INCOMPLETE_SUFFIX: &str = ".incomplete";
pub const SNAPSHOT_MAGIC: &str = "radial-blowup-snapshot";
pub const MANIFEST_FORMAT: &str = "radial-blowup-manifest";

/// One line of `results.csv`. Empty cells mean "not applicable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub run: usize,
    pub chi: f64,
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    #[serde(rename = "M")]
    pub peak: Option<f64>,
    #[serde(rename = "m")]
    pub mass: Option<f64>,
    pub eps: Option<f64>,
    pub outcome: String,
    pub t_detect: Option<f64>,
    pub extrapolated_t: Option<f64>,
    pub ode_bound: Option<f64>,
    pub max_linf: Option<f64>,
    pub max_lp: Option<f64>,
    pub residual: Option<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub t1_status: String,
    pub j_margin: Option<f64>,
    pub metric: String,
    pub value: Option<f64>,
    /// `;`-separated names of violated properties; empty when all hold.
    pub flags: String,
}

impl ResultRow {
    pub fn new(cfg: &ScenarioConfig, run: usize) -> Self {
        ResultRow {
            scenario: cfg.scenario.name().to_string(),
            run,
            chi: cfg.physical.chi,
            n: cfg.physical.n,
            radius: cfg.physical.radius,
            cells: cfg.grid.cells,
            peak: None,
            mass: None,
            eps: None,
            outcome: String::new(),
            t_detect: None,
            extrapolated_t: None,
            ode_bound: None,
            max_linf: None,
            max_lp: None,
            residual: None,
            t0: None,
            t1: None,
            t1_status: String::new(),
            j_margin: None,
            metric: String::new(),
            value: None,
            flags: String::new(),
        }
    }

    pub fn flag(&mut self, property: &str) {
        if !self.flags.split(';').any(|f| f == property) {
            if !self.flags.is_empty() {
                self.flags.push(';');
            }
            self.flags.push_str(property);
        }
    }

    pub fn flag_list(&self) -> Vec<&str> {
        self.flags.split(';').filter(|f| !f.is_empty()).collect()
    }
}

/// One line of a history CSV; scalar and coupled runs fill different columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub t: f64,
    pub linf: Option<f64>,
    pub lp: Option<f64>,
    pub min: Option<f64>,
    pub k: Option<f64>,
    pub j_margin: Option<f64>,
    pub v_min: Option<f64>,
    pub v_linf: Option<f64>,
    pub mass_drift: Option<f64>,
    pub residual: Option<f64>,
}

/// A profile with enough metadata to rebuild its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: String,
    pub dim: usize,
    pub radius: f64,
    pub cells: usize,
    pub t: f64,
    pub params: BTreeMap<String, f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotHeader {
    format: String,
    version: u32,
    encoding: String,
    field: String,
    dim: usize,
    radius: f64,
    cells: usize,
    t: f64,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    payload_sha256: Option<String>,
}

impl Snapshot {
    pub fn from_profile(field: &str, p: &Profile, t: f64, params: BTreeMap<String, f64>) -> Self {
        let g = p.grid();
        Snapshot {
            field: field.to_string(),
            dim: g.dim(),
            radius: g.radius(),
            cells: g.cells(),
            t,
            params,
            values: p.values().to_vec(),
        }
    }

    pub fn to_profile(&self) -> Result<Profile> {
        let grid = RadialGrid::new(self.dim, self.radius, self.cells)?;
        Profile::new(grid, self.values.clone())
    }

    fn header(&self, encoding: &str, sha: Option<String>) -> SnapshotHeader {
        SnapshotHeader {
            format: SNAPSHOT_MAGIC.to_string(),
            version: 1,
            encoding: encoding.to_string(),
            field: self.field.clone(),
            dim: self.dim,
            radius: self.radius,
            cells: self.cells,
            t: self.t,
            params: self.params.clone(),
            payload_sha256: sha,
        }
    }

    /// TOML header, a `---` line, then one value per line in center order.
    pub fn encode_text(&self) -> String {
        let mut out = toml::to_string(&self.header("text", None)).expect("header serializes");
        out.push_str("---\n");
        for v in &self.values {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }

    /// TOML header and a payload of little-endian `f64`s.
    pub fn encode_binary(&self) -> (String, Vec<u8>) {
        let payload: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let sha = hex::encode(Sha256::digest(&payload));
        let header = toml::to_string(&self.header("binary", Some(sha))).expect("header serializes");
        (header, payload)
    }
}

fn format_err(what: &'static str, message: impl Into<String>) -> Error {
    Error::Format {
        what,
        message: message.into(),
    }
}

fn parse_header(text: &str, encoding: &str) -> Result<SnapshotHeader> {
    let h: SnapshotHeader =
        toml::from_str(text).map_err(|e| format_err("snapshot header", e.message().to_string()))?;
    if h.format != SNAPSHOT_MAGIC || h.version != 1 {
        return Err(format_err("snapshot header", format!("unsupported format {} v{}", h.format, h.version)));
    }
    if h.encoding != encoding {
        return Err(format_err(
            "snapshot header",
            format!("expected {encoding} encoding, found {}", h.encoding),
        ));
    }
    if h.cells == 0 || h.cells > 1 << 26 {
        return Err(format_err("snapshot header", format!("implausible cell count {}", h.cells)));
    }
    Ok(h)
}

fn from_header(h: SnapshotHeader, values: Vec<f64>) -> Result<Snapshot> {
    if values.len() != h.cells {
        return Err(format_err(
            "snapshot payload",
            format!("{} values for {} cells", values.len(), h.cells),
        ));
    }
    Ok(Snapshot {
        field: h.field,
        dim: h.dim,
        radius: h.radius,
        cells: h.cells,
        t: h.t,
        params: h.params,
        values,
    })
}

pub fn parse_snapshot_text(text: &str) -> Result<Snapshot> {
    let (head, body) = if let Some(body) = text.strip_prefix("---\n") {
        ("", body)
    } else {
        text.split_once("\n---\n")
            .ok_or_else(|| format_err("snapshot", "missing `---` separator"))?
    };
    let h = parse_header(head, "text")?;
    let values = body
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| format_err("snapshot payload", format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    from_header(h, values)
}

pub fn decode_snapshot_binary(header: &str, payload: &[u8]) -> Result<Snapshot> {
    let h = parse_header(header, "binary")?;
    if !payload.len().is_multiple_of(8) {
        return Err(format_err("snapshot payload", format!("{} bytes is not a multiple of 8", payload.len())));
    }
    if let Some(expected) = &h.payload_sha256 {
        let got = hex::encode(Sha256::digest(payload));
        if &got != expected {
            return Err(format_err("snapshot payload", "checksum mismatch"));
        }
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    from_header(h, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub tool: String,
    pub tool_version: String,
    pub scenario: String,
    pub complete: bool,
    pub error: Option<String>,
    /// Marks the parameter set as an artifact choice rather than a reference one.
    pub parameter_note: String,
    /// The validated configuration with defaults filled in.
    pub config: String,
    pub files: Vec<ManifestEntry>,
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let m: Manifest =
        serde_json::from_str(text).map_err(|e| format_err("manifest", e.to_string()))?;
    if m.format != MANIFEST_FORMAT || m.version != 1 {
        return Err(format_err("manifest", format!("unsupported format {} v{}", m.format, m.version)));
    }
    for f in &m.files {
        let p = Path::new(&f.path);
        if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(format_err("manifest", format!("path escapes the output directory: {}", f.path)));
        }
        if f.sha256.len() != 64 || !f.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format_err("manifest", format!("bad checksum for {}", f.path)));
        }
    }
    Ok(m)
}

/// Recomputes every checksum listed in `dir/manifest.json`.
pub fn verify_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m = parse_manifest(&text)?;
    for f in &m.files {
        let p = dir.join(&f.path);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if bytes.len() as u64 != f.bytes || hex::encode(Sha256::digest(&bytes)) != f.sha256 {
            return Err(format_err("manifest", format!("checksum mismatch for {}", f.path)));
        }
    }
    Ok(m)
}

/// Everything a scenario produced, in emission order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOutput {
    pub rows: Vec<ResultRow>,
    pub histories: Vec<(String, Vec<HistoryRow>)>,
    pub snapshots: Vec<(String, Snapshot)>,
    /// Wall time in seconds per run label.
    pub timings: Vec<(String, f64)>,
    pub error: Option<String>,
}

impl ScenarioOutput {
    pub fn complete(&self) -> bool {
        self.error.is_none()
    }

    pub fn flagged(&self) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| !r.flags.is_empty()).collect()
    }
}

pub fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    w.into_inner().map_err(|e| format_err("csv", e.to_string()))
}

pub fn history_csv(rows: &[HistoryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(HISTORY_COLUMNS)?;
    }
    w.into_inner().map_err(|e| format_err("csv", e.to_string()))
}

pub const RESULT_COLUMNS: &[&str] = &[
    "scenario",
    "run",
    "chi",
    "n",
    "R",
    "N",
    "M",
    "m",
    "eps",
    "outcome",
    "t_detect",
    "extrapolated_t",
    "ode_bound",
    "max_linf",
    "max_lp",
    "residual",
    "t0",
    "t1",
    "t1_status",
    "j_margin",
    "metric",
    "value",
    "flags",
];

pub const HISTORY_COLUMNS: &[&str] = &[
    "t",
    "linf",
    "lp",
    "min",
    "k",
    "j_margin",
    "v_min",
    "v_linf",
    "mass_drift",
    "residual",
];

struct Staged {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    fn add(&mut self, rel: String, bytes: Vec<u8>) {
        self.files.push((rel, bytes));
    }

    fn write_all(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (rel, bytes) in &self.files {
            let path = self.dir.join(format!("{rel}{INCOMPLETE_SUFFIX}"));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Paths written by [`emit_results`], relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub complete: bool,
}

/// Writes every artifact of `out` under `dir`.
pub fn emit_results(out: &ScenarioOutput, cfg: &ScenarioConfig, dir: &Path) -> Result<Emitted> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut staged = Staged {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };
    staged.add("results.csv".into(), results_csv(&out.rows)?);
    for (name, rows) in &out.histories {
        staged.add(format!("history/{name}.csv"), history_csv(rows)?);
    }
    for (name, snap) in &out.snapshots {
        let format = cfg.output.snapshot_format;
        if matches!(format, SnapshotFormat::Text | SnapshotFormat::Both) {
            staged.add(format!("snapshots/{name}.snap"), snap.encode_text().into_bytes());
        }
        if matches!(format, SnapshotFormat::Binary | SnapshotFormat::Both) {
            let (header, payload) = snap.encode_binary();
            staged.add(format!("snapshots/{name}.hdr"), header.into_bytes());
            staged.add(format!("snapshots/{name}.bin"), payload);
        }
    }

    let entries = staged
        .files
        .iter()
        .map(|(rel, bytes)| ManifestEntry {
            path: rel.clone(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        })
        .collect();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        version: 1,
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: cfg.scenario.name().to_string(),
        complete: out.complete(),
        error: out.error.clone(),
        parameter_note: "artifact-chosen parameters; no reference parameter set exists".to_string(),
        config: cfg.to_toml(),
        files: entries,
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');
    staged.add("manifest.json".into(), manifest_json.into_bytes());

    let mut timings = csv::Writer::from_writer(Vec::new());
    timings.write_record(["run", "wall_seconds"])?;
    for (label, secs) in &out.timings {
        timings.write_record([label.as_str(), &format!("{secs:.6}")])?;
    }
    staged.add(
        "timings.csv".into(),
        timings.into_inner().map_err(|e| format_err("csv", e.to_string()))?,
    );

    let written = staged.write_all()?;
    let files: Vec<String> = staged.files.iter().map(|(rel, _)| rel.clone()).collect();
    if out.complete() {
        for (tmp, rel) in written.iter().zip(&files) {
            let dest = dir.join(rel);
            fs::rename(tmp, &dest).map_err(|e| Error::io(&dest, e))?;
        }
    }
    Ok(Emitted {
        dir: dir.to_path_buf(),
        files,
        complete: out.complete(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshot() -> Snapshot {
        let g = RadialGrid::new(3, 1.0, 16).unwrap();
        let p = Profile::from_fn(&g, |r| 1.0 / r + 1e-300 * r);
        let mut params = BTreeMap::new();
        params.insert("chi".into(), 2.0);
        params.insert("m".into(), 1000.0);
        Snapshot::from_profile("w", &p, 0.1 + 0.2, params)
    }

    #[test]
    fn text_snapshot_round_trips_bit_exactly() {
        let s = snapshot();
        let back = parse_snapshot_text(&s.encode_text()).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.values.iter().zip(&s.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.t.to_bits(), s.t.to_bits());
    }

    #[test]
    fn binary_snapshot_round_trips_and_detects_corruption() {
        let s = snapshot();
        let (h, mut p) = s.encode_binary();
        assert_eq!(decode_snapshot_binary(&h, &p).unwrap(), s);
        p[3] ^= 1;
        assert!(decode_snapshot_binary(&h, &p).is_err());
        assert!(decode_snapshot_binary(&h, &p[..8]).is_err());
    }

    #[test]
    fn snapshot_rejects_wrong_length_and_encoding() {
        let s = snapshot();
        let text = s.encode_text();
        let short = text.trim_end().rsplit_once('\n').unwrap().0.to_string();
        assert!(parse_snapshot_text(&short).is_err());
        let (h, p) = s.encode_binary();
        assert!(parse_snapshot_text(&format!("{h}---\n")).is_err());
        assert!(decode_snapshot_binary(&text, &p).is_err());
    }

    #[test]
    fn csv_columns_are_constant() {
        let cfg = super::super::config::ScenarioConfig::parse(
            "scenario = \"single_run\"\n[physical]\nchi = 2.0\nn = 3\nR = 1.0\n[grid]\nN = 64\n",
        )
        .unwrap();
        let mut a = ResultRow::new(&cfg, 0);
        a.peak = Some(8.0);
        a.flag("x");
        a.flag("y");
        a.flag("x");
        assert_eq!(a.flags, "x;y");
        let b = ResultRow::new(&cfg, 1);
        let bytes = results_csv(&[a, b]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let counts: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
        assert!(counts.iter().all(|&c| c == RESULT_COLUMNS.len()));
        assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));
        let empty = String::from_utf8(history_csv(&[]).unwrap()).unwrap();
        assert_eq!(empty.trim_end(), HISTORY_COLUMNS.join(","));
    }

    #[test]
    fn manifest_paths_cannot_escape() {
        let good = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            tool: "t".into(),
            tool_version: "0".into(),
            scenario: "s".into(),
            complete: true,
            error: None,
            parameter_note: String::new(),
            config: String::new(),
            files: vec![ManifestEntry {
                path: "results.csv".into(),
                bytes: 0,
                sha256: "0".repeat(64),
            }],
        };
        let text = serde_json::to_string(&good).unwrap();
        assert_eq!(parse_manifest(&text).unwrap(), good);
        let bad = text.replace("results.csv", "../x");
        assert!(parse_manifest(&bad).is_err());
    }
}

//! CSV and JSON file formats.
//!
//! Floats are written with 17 significant digits so that reading a file back
//! reproduces every value bitwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cpgeo_core::dataset::{FlightCondition, RawSample};
use cpgeo_core::{ControlGrid, PatchId, RiemannianFeatures, SurfacePoint, Vec3};
use serde::Serialize;

use crate::error::{Error, Result};

pub const GRID_HEADER: [&str; 6] = ["patch_id", "a", "b", "x", "y", "z"];
pub const SAMPLE_HEADER: [&str; 8] = ["patch_id", "u", "v", "Ma", "AoA", "Re", "span", "cp"];
pub const FEATURE_HEADER: [&str; 16] = [
    "patch_id", "u", "v", "x", "y", "z", "g11", "g12", "g22", "gam111", "gam112", "gam122", "gam211", "gam212",
    "gam222", "S",
];

/// `{:.16e}`: 17 significant digits, round-trips through `str::parse`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| Error::format(path, e))
}

/// Minimal CSV writer over string cells.
pub struct CsvOut {
    inner: csv::Writer<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl CsvOut {
    pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(create(path)?);
        inner
            .write_record(header.iter().map(|s| s.as_ref()))
            .map_err(|e| Error::format(path, e))?;
        Ok(CsvOut { inner, path: path.to_path_buf() })
    }

    pub fn row<I, S>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(cells).map_err(|e| Error::format(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// CSV reader resolving named columns once.
pub struct CsvIn {
    path: std::path::PathBuf,
    columns: Vec<usize>,
    records: Vec<csv::StringRecord>,
}

impl CsvIn {
    pub fn open(path: &Path, required: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::format(path, e))?;
        let header = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
        let columns = required
            .iter()
            .map(|name| {
                header
                    .iter()
                    .position(|h| h == *name)
                    .ok_or_else(|| Error::format(path, format!("missing column '{name}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut records = Vec::new();
        for (i, r) in rdr.records().enumerate() {
            records.push(r.map_err(|e| Error::parse(path, i + 1, e))?);
        }
        Ok(CsvIn { path: path.to_path_buf(), columns, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Raw text of required column `col` in data row `row` (0-based).
    pub fn text(&self, row: usize, col: usize) -> &str {
        self.records[row].get(self.columns[col]).unwrap_or("")
    }

    pub fn f64(&self, row: usize, col: usize) -> Result<f64> {
        let s = self.text(row, col);
        let x: f64 = s
            .parse()
            .map_err(|_| self.err(row, format!("column {}: '{s}' is not a number", self.columns[col] + 1)))?;
        if !x.is_finite() {
            return Err(self.err(row, format!("non-finite value '{s}'")));
        }
        Ok(x)
    }

    pub fn usize(&self, row: usize, col: usize) -> Result<usize> {
        let s = self.text(row, col);
        s.parse()
            .map_err(|_| self.err(row, format!("'{s}' is not a non-negative integer")))
    }

    pub fn err(&self, row: usize, msg: impl ToString) -> Error {
        Error::parse(&self.path, row + 1, msg)
    }
}

pub fn read_grids(path: &Path) -> Result<Vec<ControlGrid>> {
    let csv = CsvIn::open(path, &GRID_HEADER)?;
    let mut patches: BTreeMap<u32, BTreeMap<(usize, usize), Vec3>> = BTreeMap::new();
    for r in 0..csv.len() {
        let id = csv.usize(r, 0)? as u32;
        let (a, b) = (csv.usize(r, 1)?, csv.usize(r, 2)?);
        let p = Vec3::new(csv.f64(r, 3)?, csv.f64(r, 4)?, csv.f64(r, 5)?);
        if patches.entry(id).or_default().insert((a, b), p).is_some() {
            return Err(csv.err(r, format!("duplicate control point ({a}, {b}) in patch {id}")));
        }
    }
    patches
        .into_iter()
        .map(|(id, pts)| {
            let m = pts.keys().map(|k| k.0).max().unwrap_or(0);
            let n = pts.keys().map(|k| k.1).max().unwrap_or(0);
            if pts.len() != (m + 1) * (n + 1) {
                return Err(Error::format(
                    path,
                    format!("patch {id}: {} control points do not fill a {}x{} grid", pts.len(), m + 1, n + 1),
                ));
            }
            ControlGrid::from_fn(PatchId(id), m, n, |a, b| pts[&(a, b)]).map_err(Error::from)
        })
        .collect()
}

pub fn write_grids(path: &Path, grids: &[ControlGrid]) -> Result<()> {
    let mut out = CsvOut::create(path, &GRID_HEADER)?;
    for g in grids {
        let (m, n) = g.degrees();
        for a in 0..=m {
            for b in 0..=n {
                let p = g.point(a, b);
                out.row([
                    g.patch().to_string(),
                    a.to_string(),
                    b.to_string(),
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                    fmt_f64(p[2]),
                ])?;
            }
        }
    }
    out.finish()
}

/// Reads a sample file. With `known` set, rows naming another patch are
/// rejected.
pub fn load_samples(path: &Path, known: Option<&BTreeSet<PatchId>>) -> Result<Vec<RawSample>> {
    let csv = CsvIn::open(path, &SAMPLE_HEADER)?;
    let mut out = Vec::with_capacity(csv.len());
    for r in 0..csv.len() {
        let patch = PatchId(csv.usize(r, 0)? as u32);
        if known.is_some_and(|k| !k.contains(&patch)) {
            return Err(csv.err(r, format!("unknown patch_id {patch}")));
        }
        let location = SurfacePoint::new(patch, csv.f64(r, 1)?, csv.f64(r, 2)?).map_err(|e| csv.err(r, e))?;
        let condition =
            FlightCondition::new(csv.f64(r, 3)?, csv.f64(r, 4)?, csv.f64(r, 5)?).map_err(|e| csv.err(r, e))?;
        let span = if csv.text(r, 6).is_empty() { None } else { Some(csv.f64(r, 6)?) };
        out.push(RawSample { row: r + 1, location, condition, cp: csv.f64(r, 7)?, span });
    }
    Ok(out)
}

pub fn write_samples(path: &Path, samples: &[RawSample]) -> Result<()> {
    let mut out = CsvOut::create(path, &SAMPLE_HEADER)?;
    for s in samples {
        out.row([
            s.location.patch.to_string(),
            fmt_f64(s.location.u),
            fmt_f64(s.location.v),
            fmt_f64(s.condition.mach),
            fmt_f64(s.condition.aoa),
            fmt_f64(s.condition.reynolds),
            s.span.map(fmt_f64).unwrap_or_default(),
            fmt_f64(s.cp),
        ])?;
    }
    out.finish()
}

/// One feature-dump row: `Γ` listed as `[k][i][j]` with `i ≤ j`.
pub fn feature_cells(f: &RiemannianFeatures, pos: Vec3) -> Vec<String> {
    let p = f.point;
    let mut cells = vec![p.patch.to_string(), fmt_f64(p.u), fmt_f64(p.v)];
    cells.extend(pos.0.iter().map(|&x| fmt_f64(x)));
    cells.extend([f.g[0][0], f.g[0][1], f.g[1][1]].map(fmt_f64));
    for k in 0..2 {
        cells.extend([f.gamma[k][0][0], f.gamma[k][0][1], f.gamma[k][1][1]].map(fmt_f64));
    }
    cells.push(fmt_f64(f.scalar));
    cells
}

/// Point feature dump, one row per point.
pub fn write_feature_dump(path: &Path, rows: &[(RiemannianFeatures, Vec3)]) -> Result<()> {
    let mut out = CsvOut::create(path, &FEATURE_HEADER)?;
    for (f, pos) in rows {
        out.row(feature_cells(f, *pos))?;
    }
    out.finish()
}

/// Stencil dump: the feature dump with a leading `sample` index and a
/// trailing `stencil_slot` column (0..=8, row-major NW..SE).
pub fn write_stencil_dump(path: &Path, rows: &[(usize, [RiemannianFeatures; 9], [[f64; 3]; 9])]) -> Result<()> {
    let header: Vec<&str> = std::iter::once("sample")
        .chain(FEATURE_HEADER)
        .chain(std::iter::once("stencil_slot"))
        .collect();
    let mut out = CsvOut::create(path, &header)?;
    for (sample, feats, pos) in rows {
        for slot in 0..9 {
            let mut cells = vec![sample.to_string()];
            cells.extend(feature_cells(&feats[slot], Vec3(pos[slot])));
            cells.push(slot.to_string());
            out.row(cells)?;
        }
    }
    out.finish()
}

//! CSV input and output.
//!
//! Layout of the input files: a header row, one row per site. An optional
//! identifier column (named `site` by default) is carried along but not
//! modelled. Every other column of the counts file is a species; every other
//! column of the climate file is a climate coordinate (one or two). Column
//! subsets and orders can be picked by name through [`LoadOptions`].
//!
//! Floats are written with Rust's shortest round-trip representation, so every
//! file written here reads back to identical values.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::crossval::CvPosterior;
use crate::error::{Error, Result};
use crate::model::{ClimateTable, CountMatrix, Dataset};

/// Formats a float so that parsing the text gives back the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// Name of the identifier column; skipped when present.
    pub site_column: String,
    /// Species columns to keep, in order. `None` keeps all.
    pub species: Option<Vec<String>>,
    /// Climate columns to keep, in order. `None` keeps all.
    pub climate: Option<Vec<String>>,
    /// Rescale climate columns to mean 0, variance 1.
    pub standardize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { site_column: "site".into(), species: None, climate: None, standardize: false }
    }
}

/// A dataset with the names it was loaded under.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub dataset: Dataset,
    pub sites: Vec<String>,
    pub species: Vec<String>,
    pub climate_columns: Vec<String>,
}

struct RawTable {
    path: PathBuf,
    headers: Vec<String>,
    /// `(line number, cells)`.
    rows: Vec<(u64, Vec<String>)>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::Io(e),
    })
}

fn read_raw(path: &Path) -> Result<RawTable> {
    let ctx = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
    let headers: Vec<String> = rdr.headers().map_err(ctx)?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(ctx)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(|c| c.trim().to_string()).collect()));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    Ok(RawTable { path: path.to_path_buf(), headers, rows })
}

impl RawTable {
    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Indices of the selected value columns and the site column, if any.
    fn select(&self, site: &str, wanted: Option<&[String]>) -> Result<(Vec<usize>, Option<usize>)> {
        let site_col = self.column(site);
        let cols = match wanted {
            Some(names) => names
                .iter()
                .map(|n| {
                    self.column(n).ok_or_else(|| Error::Data(format!("{}: no column named '{n}'", self.path.display())))
                })
                .collect::<Result<Vec<_>>>()?,
            None => (0..self.headers.len()).filter(|&c| Some(c) != site_col).collect(),
        };
        if cols.is_empty() {
            return Err(Error::Data(format!("{}: no value columns", self.path.display())));
        }
        Ok((cols, site_col))
    }

    fn cell_error(&self, line: u64, col: usize, what: &str) -> Error {
        Error::Data(format!("{}: line {line}, column '{}': {what}", self.path.display(), self.headers[col]))
    }

    fn site_ids(&self, site_col: Option<usize>) -> Vec<String> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, (_, r))| site_col.map_or_else(|| i.to_string(), |c| r[c].clone()))
            .collect()
    }
}

pub fn load_counts(path: &Path, opts: &LoadOptions) -> Result<(CountMatrix, Vec<String>, Vec<String>)> {
    let t = read_raw(path)?;
    let (cols, site_col) = t.select(&opts.site_column, opts.species.as_deref())?;
    let mut counts = Vec::with_capacity(t.rows.len() * cols.len());
    for (line, row) in &t.rows {
        let mut total = 0u64;
        for &c in &cols {
            let cell = &row[c];
            let v: i64 =
                cell.parse().map_err(|_| t.cell_error(*line, c, &format!("not an integer count: '{cell}'")))?;
            if v < 0 {
                return Err(t.cell_error(*line, c, &format!("negative count {v}")));
            }
            let v = u32::try_from(v).map_err(|_| t.cell_error(*line, c, &format!("count {v} too large")))?;
            total += u64::from(v);
            counts.push(v);
        }
        if total == 0 {
            return Err(Error::Data(format!(
                "{}: line {line}: all counts are zero; every site needs a positive total so its active set is non-empty",
                t.path.display()
            )));
        }
    }
    let m = cols.len();
    let matrix = CountMatrix::new(t.rows.len(), m, counts)?;
    let names = cols.iter().map(|&c| t.headers[c].clone()).collect();
    Ok((matrix, names, t.site_ids(site_col)))
}

pub fn load_climate(path: &Path, opts: &LoadOptions) -> Result<(ClimateTable, Vec<String>, Vec<String>)> {
    let t = read_raw(path)?;
    let (cols, site_col) = t.select(&opts.site_column, opts.climate.as_deref())?;
    if cols.len() > 2 {
        return Err(Error::Data(format!(
            "{}: {} climate columns, expected 1 or 2 (select them by name)",
            t.path.display(),
            cols.len()
        )));
    }
    let mut values = Vec::with_capacity(t.rows.len() * cols.len());
    for (line, row) in &t.rows {
        for &c in &cols {
            let cell = &row[c];
            let v: f64 = cell.parse().map_err(|_| t.cell_error(*line, c, &format!("not a number: '{cell}'")))?;
            if !v.is_finite() {
                return Err(t.cell_error(*line, c, "non-finite value"));
            }
            values.push(v);
        }
    }
    let mut table = ClimateTable::new(t.rows.len(), cols.len(), values)?;
    if opts.standardize {
        table = table.standardized()?;
    }
    let names = cols.iter().map(|&c| t.headers[c].clone()).collect();
    Ok((table, names, t.site_ids(site_col)))
}

/// Loads a counts file and a climate file describing the same sites.
pub fn load_dataset(counts: &Path, climate: &Path, opts: &LoadOptions) -> Result<Loaded> {
    let (c, species, sites) = load_counts(counts, opts)?;
    let (x, climate_columns, climate_sites) = load_climate(climate, opts)?;
    if c.n_sites() != x.n_sites() {
        return Err(Error::Data(format!(
            "dimension mismatch: {} has {} sites, {} has {}",
            counts.display(),
            c.n_sites(),
            climate.display(),
            x.n_sites()
        )));
    }
    if let Some(i) = (0..sites.len()).find(|&i| sites[i] != climate_sites[i]) {
        return Err(Error::Data(format!(
            "site ids differ at data row {}: '{}' in {}, '{}' in {}",
            i + 1,
            sites[i],
            counts.display(),
            climate_sites[i],
            climate.display()
        )));
    }
    Ok(Loaded { dataset: Dataset::new(c, x)?, sites, species, climate_columns })
}

pub(crate) fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_writer(File::create(path)?))
}

pub fn species_names(m: usize) -> Vec<String> {
    (1..=m).map(|k| format!("sp{k:03}")).collect()
}

pub fn site_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:03}")).collect()
}

pub fn climate_names(d: usize) -> Vec<String> {
    match d {
        1 => vec!["x".into()],
        _ => (1..=d).map(|j| format!("x{j}")).collect(),
    }
}

pub fn write_counts(path: &Path, counts: &CountMatrix, sites: &[String], species: &[String]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(std::iter::once("site").chain(species.iter().map(String::as_str)))?;
    for (i, site) in sites.iter().enumerate().take(counts.n_sites()) {
        let mut rec = vec![site.clone()];
        rec.extend(counts.row(i).iter().map(u32::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes raw climate values (standardization is undone when present).
pub fn write_climate(path: &Path, climate: &ClimateTable, sites: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let names = climate_names(climate.dim());
    w.write_record(std::iter::once("site").chain(names.iter().map(String::as_str)))?;
    for (i, site) in sites.iter().enumerate().take(climate.n_sites()) {
        let p = match climate.standardization() {
            Some(s) => s.to_raw(climate.point(i)),
            None => climate.point(i).to_vec(),
        };
        let mut rec = vec![site.clone()];
        rec.extend(p.into_iter().map(fmt_f64));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cv_sample_path(dir: &Path, site: usize) -> PathBuf {
    dir.join("cv").join(format!("site_{site:03}.csv"))
}

pub fn write_cv_samples(path: &Path, cv: &CvPosterior) -> Result<()> {
    let mut w = create(path)?;
    let names = climate_names(cv.dim);
    w.write_record(std::iter::once("draw").chain(names.iter().map(String::as_str)))?;
    for t in 0..cv.len() {
        let mut rec = vec![t.to_string()];
        rec.extend(cv.draw(t).iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(dim, interleaved samples)` from a file written by [`write_cv_samples`].
pub fn read_cv_samples(path: &Path) -> Result<(usize, Vec<f64>)> {
    let t = read_raw(path)?;
    let dim = t.headers.len().saturating_sub(1);
    if !(1..=2).contains(&dim) || t.headers[0] != "draw" {
        return Err(Error::Data(format!("{}: expected columns draw,x or draw,x1,x2", t.path.display())));
    }
    let mut out = Vec::with_capacity(t.rows.len() * dim);
    for (line, row) in &t.rows {
        for (c, cell) in row.iter().enumerate().skip(1).take(dim) {
            let v: f64 = cell.parse().map_err(|_| t.cell_error(*line, c, &format!("not a number: '{cell}'")))?;
            out.push(v);
        }
    }
    Ok((dim, out))
}

/// HPD segments as `lo:hi;lo:hi`.
pub fn fmt_segments(segments: &[(f64, f64)]) -> String {
    segments.iter().map(|(a, b)| format!("{}:{}", fmt_f64(*a), fmt_f64(*b))).collect::<Vec<_>>().join(";")
}

pub fn parse_segments(s: &str) -> Result<Vec<(f64, f64)>> {
    let bad = || Error::Data(format!("malformed HPD segment list '{s}'"));
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|seg| {
            let (a, b) = seg.split_once(':').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        })
        .collect()
}

/// One row of `cv_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub site: usize,
    pub coord: usize,
    pub observed: f64,
    pub mode: f64,
    pub median: f64,
    pub variance: f64,
    pub hpd_mass: f64,
    pub hpd: Vec<(f64, f64)>,
    pub covered: bool,
}

pub const SUMMARY_HEADER: [&str; 9] =
    ["site", "coord", "observed", "mode", "median", "variance", "hpd_mass", "hpd", "covered"];

pub fn summary_rows(cv: &[CvPosterior], observed: &ClimateTable) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for p in cv {
        for d in 0..p.dim {
            let obs = observed.point(p.site)[d];
            let hpd = &p.summary.hpd[d];
            rows.push(SummaryRow {
                site: p.site,
                coord: d,
                observed: obs,
                mode: p.summary.mode[d],
                median: p.summary.median[d],
                variance: p.summary.variance[d],
                hpd_mass: hpd.mass,
                hpd: hpd.segments.clone(),
                covered: hpd.contains(obs),
            });
        }
    }
    rows
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.site.to_string(),
            r.coord.to_string(),
            fmt_f64(r.observed),
            fmt_f64(r.mode),
            fmt_f64(r.median),
            fmt_f64(r.variance),
            fmt_f64(r.hpd_mass),
            fmt_segments(&r.hpd),
            r.covered.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let t = read_raw(path)?;
    if t.headers != SUMMARY_HEADER {
        return Err(Error::Data(format!("{}: unexpected header", t.path.display())));
    }
    t.rows
        .iter()
        .map(|(line, r)| {
            let f = |c: usize| -> Result<f64> { r[c].parse().map_err(|_| t.cell_error(*line, c, "not a number")) };
            let u = |c: usize| -> Result<usize> { r[c].parse().map_err(|_| t.cell_error(*line, c, "not an index")) };
            Ok(SummaryRow {
                site: u(0)?,
                coord: u(1)?,
                observed: f(2)?,
                mode: f(3)?,
                median: f(4)?,
                variance: f(5)?,
                hpd_mass: f(6)?,
                hpd: parse_segments(&r[7])?,
                covered: r[8].parse().map_err(|_| t.cell_error(*line, 8, "not a boolean"))?,
            })
        })
        .collect()
}

/// Reads any table written by this crate into its header and raw cells.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let t = read_raw(path)?;
    Ok((t.headers, t.rows.into_iter().map(|(_, r)| r).collect()))
}

/// Writes a header and rows of pre-formatted cells.
pub fn write_table<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(AsRef::as_ref))?;
    }
    w.flush()?;
    Ok(())
}

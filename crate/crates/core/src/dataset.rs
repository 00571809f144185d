//! Junction datasets and their CSV representation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Regime;

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_MINOR: u32 = 0;

pub const CSV_COLUMNS: [&str; 11] = [
    "chip_id", "x_mm", "y_mm", "group", "nom_w_nm", "nom_l_nm", "lw_top_nm", "lw_bot_nm", "regime", "area_um2",
    "r_ohm",
];
const REQUIRED_COLUMNS: [&str; 6] = ["chip_id", "x_mm", "y_mm", "group", "area_um2", "r_ohm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionRecord {
    pub chip_id: u32,
    pub x_mm: f64,
    pub y_mm: f64,
    /// Area-group label, conventionally the nominal area in µm².
    pub group: String,
    pub nom_w_nm: Option<f64>,
    pub nom_l_nm: Option<f64>,
    pub lw_top_nm: Option<f64>,
    pub lw_bot_nm: Option<f64>,
    pub regime: Option<Regime>,
    pub area_um2: f64,
    /// Normal resistance; infinite for an open junction.
    pub r_ohm: f64,
}

impl JunctionRecord {
    /// True when the record carries a usable finite resistance.
    pub fn is_conducting(&self) -> bool {
        self.regime != Some(Regime::None) && self.area_um2 > 0.0 && self.r_ohm.is_finite() && self.r_ohm > 0.0
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(self.x_mm.is_finite() && self.y_mm.is_finite()) {
            return Err("non-finite position".into());
        }
        if self.regime == Some(Regime::None) {
            return Ok(());
        }
        if !(self.area_um2.is_finite() && self.area_um2 > 0.0) {
            return Err(format!("area must be > 0 for an overlapping junction, got {}", self.area_um2));
        }
        if self.r_ohm.is_nan() || self.r_ohm <= 0.0 {
            return Err(format!("resistance must be > 0, got {}", self.r_ohm));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Simulated,
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub source: DataSource,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub tool_version: String,
}

impl DatasetMetadata {
    pub fn measured() -> Self {
        Self {
            source: DataSource::Measured,
            seed: None,
            config_hash: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn simulated(seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            source: DataSource::Simulated,
            seed: Some(seed),
            config_hash: Some(config_hash.into()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionDataset {
    pub records: Vec<JunctionRecord>,
    pub metadata: DatasetMetadata,
}

/// A row skipped during lenient reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    /// Fail on the first malformed row instead of skipping it.
    pub strict: bool,
    /// Accept columns outside the known schema (ignored).
    pub allow_extra_columns: bool,
    /// Reject positions outside `[0, w] × [0, h]` mm.
    pub substrate_mm: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ReadOutcome {
    pub dataset: JunctionDataset,
    pub skipped: Vec<RowError>,
}

impl JunctionDataset {
    pub fn new(records: Vec<JunctionRecord>, metadata: DatasetMetadata) -> Self {
        Self { records, metadata }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records grouped by label, in ascending numeric order of the label
    /// when it parses as a number.
    pub fn by_group(&self) -> Vec<(String, Vec<&JunctionRecord>)> {
        let mut map: BTreeMap<&str, Vec<&JunctionRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.group.as_str()).or_default().push(r);
        }
        let mut groups: Vec<_> = map.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        groups.sort_by(|a, b| compare_labels(&a.0, &b.0));
        groups
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = writer;
        writeln!(
            w,
            "# jjvar junctions schema {SCHEMA_MAJOR}.{SCHEMA_MINOR}; units: mm, nm, um2, ohm"
        )?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(CSV_COLUMNS)?;
        for r in &self.records {
            csv.write_record([
                r.chip_id.to_string(),
                r.x_mm.to_string(),
                r.y_mm.to_string(),
                r.group.clone(),
                opt(r.nom_w_nm),
                opt(r.nom_l_nm),
                opt(r.lw_top_nm),
                opt(r.lw_bot_nm),
                r.regime.map(|g| g.as_str().to_string()).unwrap_or_default(),
                r.area_um2.to_string(),
                r.r_ohm.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(mut reader: R, opts: &ReadOptions) -> Result<ReadOutcome> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        parse_csv(&text, opts)
    }

    pub fn read_csv_file(path: &Path, opts: &ReadOptions) -> Result<ReadOutcome> {
        Self::read_csv(std::fs::File::open(path)?, opts)
    }
}

pub(crate) fn compare_labels(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn check_schema_line(line: &str) -> Result<()> {
    let Some(rest) = line.split("schema").nth(1) else {
        return Ok(());
    };
    let version = rest.trim_start().split([';', ' ']).next().unwrap_or("");
    let major: u32 = version
        .split('.')
        .next()
        .and_then(|m| m.parse().ok())
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("bad schema version '{version}'") })?;
    if major > SCHEMA_MAJOR {
        return Err(Error::SchemaVersion {
            found: version.to_string(),
            supported: format!("{SCHEMA_MAJOR}.x"),
        });
    }
    Ok(())
}

fn parse_csv(text: &str, opts: &ReadOptions) -> Result<ReadOutcome> {
    let mut comment_lines = 0;
    let mut body = text;
    while body.starts_with('#') {
        let end = body.find('\n').map_or(body.len(), |i| i + 1);
        check_schema_line(&body[..end])?;
        body = &body[end..];
        comment_lines += 1;
    }

    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(body.as_bytes());
    let header_line = comment_lines + 1;
    let headers = rdr.headers()?.clone();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, name) in headers.iter().enumerate() {
        let name = name.trim();
        if let Some(&known) = CSV_COLUMNS.iter().find(|&&c| c == name) {
            index.insert(known, i);
        } else if !opts.allow_extra_columns {
            return Err(Error::Parse {
                line: header_line,
                msg: format!("unknown column '{name}'"),
            });
        }
    }
    for col in REQUIRED_COLUMNS {
        if !index.contains_key(col) {
            return Err(Error::Parse { line: header_line, msg: format!("missing column '{col}'") });
        }
    }

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = comment_lines + row.position().map_or(0, |p| p.line() as usize);
        let parsed = parse_row(&row, &index, headers.len()).and_then(|rec| {
            rec.validate()?;
            if let Some((w, h)) = opts.substrate_mm {
                if rec.x_mm < 0.0 || rec.x_mm > w || rec.y_mm < 0.0 || rec.y_mm > h {
                    return Err(format!("position ({}, {}) outside {w}×{h} mm substrate", rec.x_mm, rec.y_mm));
                }
            }
            Ok(rec)
        });
        match parsed {
            Ok(rec) => records.push(rec),
            Err(msg) if opts.strict => return Err(Error::Parse { line, msg }),
            Err(msg) => skipped.push(RowError { line, msg }),
        }
    }
    Ok(ReadOutcome {
        dataset: JunctionDataset::new(records, DatasetMetadata::measured()),
        skipped,
    })
}

fn parse_row(
    row: &csv::StringRecord,
    index: &BTreeMap<&str, usize>,
    width: usize,
) -> std::result::Result<JunctionRecord, String> {
    if row.len() != width {
        return Err(format!("expected {width} fields, found {}", row.len()));
    }
    let field = |name: &str| index.get(name).map(|&i| row[i].trim()).unwrap_or("");
    let number = |name: &str| -> std::result::Result<f64, String> {
        field(name).parse::<f64>().map_err(|_| format!("{name}: cannot parse '{}'", field(name)))
    };
    let optional = |name: &str| -> std::result::Result<Option<f64>, String> {
        match field(name) {
            "" => Ok(None),
            s => s.parse().map(Some).map_err(|_| format!("{name}: cannot parse '{s}'")),
        }
    };
    let chip_id = field("chip_id")
        .parse()
        .map_err(|_| format!("chip_id: cannot parse '{}'", field("chip_id")))?;
    let group = field("group");
    if group.is_empty() {
        return Err("group: empty".into());
    }
    let regime = match field("regime") {
        "" => None,
        s => Some(s.parse::<Regime>().map_err(|e| format!("regime: {e}"))?),
    };
    Ok(JunctionRecord {
        chip_id,
        x_mm: number("x_mm")?,
        y_mm: number("y_mm")?,
        group: group.to_string(),
        nom_w_nm: optional("nom_w_nm")?,
        nom_l_nm: optional("nom_l_nm")?,
        lw_top_nm: optional("lw_top_nm")?,
        lw_bot_nm: optional("lw_bot_nm")?,
        regime,
        area_um2: number("area_um2")?,
        r_ohm: number("r_ohm")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(chip: u32, group: &str, area: f64, r: f64) -> JunctionRecord {
        JunctionRecord {
            chip_id: chip,
            x_mm: 1.25,
            y_mm: 3.0,
            group: group.into(),
            nom_w_nm: Some(150.0),
            nom_l_nm: Some(170.0),
            lw_top_nm: Some(151.3),
            lw_bot_nm: Some(148.0),
            regime: Some(Regime::Full),
            area_um2: area,
            r_ohm: r,
        }
    }

    fn to_string(ds: &JunctionDataset) -> String {
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut open = record(2, "0.008", 0.0, f64::INFINITY);
        open.regime = Some(Regime::None);
        let ds = JunctionDataset::new(
            vec![record(1, "0.025", 0.025_500_000_000_000_1, 28627.450980392157), open],
            DatasetMetadata::measured(),
        );
        let text = to_string(&ds);
        assert!(text.lines().nth(1).unwrap() == CSV_COLUMNS.join(","));
        let back = JunctionDataset::read_csv(text.as_bytes(), &ReadOptions::default()).unwrap();
        assert!(back.skipped.is_empty());
        assert_eq!(back.dataset.records, ds.records);
    }

    #[test]
    fn malformed_rows_are_reported_with_line_numbers() {
        let text = "# jjvar junctions schema 1.0\n\
                    chip_id,x_mm,y_mm,group,area_um2,r_ohm\n\
                    1,1,1,0.025,0.025,1000\n\
                    1,1,oops,0.025,0.025,1000\n\
                    1,1,1,0.025,0.025,-5\n";
        let lenient = JunctionDataset::read_csv(text.as_bytes(), &ReadOptions::default()).unwrap();
        assert_eq!(lenient.dataset.len(), 1);
        let lines: Vec<usize> = lenient.skipped.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![4, 5]);

        let strict = ReadOptions { strict: true, ..Default::default() };
        match JunctionDataset::read_csv(text.as_bytes(), &strict) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn newer_major_schema_rejected() {
        let text = "# jjvar junctions schema 2.0\nchip_id,x_mm,y_mm,group,area_um2,r_ohm\n";
        assert!(matches!(
            JunctionDataset::read_csv(text.as_bytes(), &ReadOptions::default()),
            Err(Error::SchemaVersion { .. })
        ));
        let minor = "# jjvar junctions schema 1.7\nchip_id,x_mm,y_mm,group,area_um2,r_ohm\n";
        assert!(JunctionDataset::read_csv(minor.as_bytes(), &ReadOptions::default()).is_ok());
    }

    #[test]
    fn extra_columns_need_flag() {
        let text = "chip_id,x_mm,y_mm,group,area_um2,r_ohm,operator\n1,1,1,a,0.1,10,bob\n";
        assert!(JunctionDataset::read_csv(text.as_bytes(), &ReadOptions::default()).is_err());
        let opts = ReadOptions { allow_extra_columns: true, ..Default::default() };
        let out = JunctionDataset::read_csv(text.as_bytes(), &opts).unwrap();
        assert_eq!(out.dataset.records[0].lw_top_nm, None);
    }

    #[test]
    fn substrate_bounds_checked() {
        let text = "chip_id,x_mm,y_mm,group,area_um2,r_ohm\n1,30,1,a,0.1,10\n";
        let opts = ReadOptions { substrate_mm: Some((22.0, 22.0)), ..Default::default() };
        let out = JunctionDataset::read_csv(text.as_bytes(), &opts).unwrap();
        assert_eq!(out.skipped.len(), 1);
    }

    #[test]
    fn groups_sorted_numerically() {
        let ds = JunctionDataset::new(
            vec![record(1, "0.12", 0.1, 1.0), record(1, "0.008", 0.1, 1.0), record(1, "0.025", 0.1, 1.0)],
            DatasetMetadata::measured(),
        );
        let labels: Vec<String> = ds.by_group().into_iter().map(|g| g.0).collect();
        assert_eq!(labels, ["0.008", "0.025", "0.12"]);
    }
}

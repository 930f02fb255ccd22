//! Run configuration and the JSON/CSV report format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::growth::RadiusSchedule;
use crate::nevanlinna::CircleGrid;
use crate::numerics::PrecisionPolicy;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of per-radius tables.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "r",
    "m0",
    "N0",
    "T0",
    "logM0_ln",
    "bound_ln",
    "logderiv_max_ln",
    "violation_flag",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub precision: PrecisionPolicy,
    pub schedule: RadiusSchedule,
    pub grid: CircleGrid,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision: PrecisionPolicy::default(),
            schedule: RadiusSchedule::default(),
            grid: CircleGrid::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.precision.validate()?;
        self.schedule.validate()?;
        self.grid.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {}", e.message())))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// One run: resolved config, inputs, a table of rows and scalar estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub inputs: Map<String, Value>,
    pub estimates: Map<String, Value>,
    pub violations: usize,
    pub columns: Vec<String>,
    pub rows: Vec<Map<String, Value>>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Report {
            command: command.to_string(),
            version: VERSION.to_string(),
            config: config.clone(),
            inputs: Map::new(),
            estimates: Map::new(),
            violations: 0,
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn input(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.inputs.insert(key.to_string(), to_value(v));
        self
    }

    pub fn estimate(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.estimates.insert(key.to_string(), to_value(v));
        self
    }

    pub fn set_columns(&mut self, cols: &[&str]) -> &mut Self {
        self.columns = cols.iter().map(|c| c.to_string()).collect();
        self
    }

    /// Appends a row; keys outside `columns` stay in the JSON only.
    pub fn push_row(&mut self, row: Map<String, Value>) {
        self.rows.push(row);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("report: {e}")))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(self.columns.iter().map(|c| cell(row.get(c))))
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", dir.display())))?;
        let jp = dir.join(format!("{stem}.json"));
        let cp = dir.join(format!("{stem}.csv"));
        write_file(&jp, self.to_json().as_bytes())?;
        write_file(&cp, self.to_csv()?.as_bytes())?;
        Ok((jp, cp))
    }
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<()> {
    fs::File::create(p)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", p.display())))
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Bool(b)) => u8::from(*b).to_string(),
        Some(x) => x.to_string(),
    }
}

/// Builds a row object from `(column, value)` pairs.
pub fn row<const N: usize>(cells: [(&str, Value); N]) -> Map<String, Value> {
    cells.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_and_partial_toml() {
        let c = RunConfig::from_toml("seed = 3\n[schedule]\ncount = 12\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.schedule.count, 12);
        assert_eq!(c.schedule.ratio, 0.9);
        let back = RunConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[schedule]\nratio = 1.5").is_err());
    }

    #[test]
    fn csv_follows_column_order() {
        let mut rep = Report::new("nevanlinna", &RunConfig::default());
        rep.set_columns(&SWEEP_COLUMNS);
        rep.push_row(row([
            ("T0", num(1.5)),
            ("r", num(0.5)),
            ("violation_flag", Value::Bool(true)),
            ("extra", num(9.0)),
            ("m0", num(f64::NAN)),
        ]));
        let csv = rep.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "0.5,,,1.5,,,,1");
        let back = Report::from_json(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
        assert_eq!(back.to_json(), rep.to_json());
    }
}

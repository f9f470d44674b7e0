//! Row types and writers. CSV files hold only deterministic columns; wall
//! times go to the JSON mirror.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Result;

/// One line of a table: an estimate for one `(k, method)` pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub command: String,
    pub model: String,
    pub k: u64,
    pub method: String,
    pub n: Option<u64>,
    pub n_prime: Option<u64>,
    pub q: Option<f64>,
    /// Squared bias, exact or estimated (clamped at 0).
    pub sq_bias: Option<f64>,
    pub sq_bias_raw: Option<f64>,
    pub sq_bias_se: Option<f64>,
    pub sq_bias_clamped: Option<bool>,
    /// Exact squared bias, for reference.
    pub exact_sq_bias: Option<f64>,
    /// `‖ψ̄ − θ*‖²_H`; uses the true optimum.
    pub sq_dist: Option<f64>,
    pub variance: Option<f64>,
    pub variance_se: Option<f64>,
    pub est_variance: Option<f64>,
    pub est_variance_se: Option<f64>,
    /// Total draws of the estimator batch.
    pub cost: Option<u64>,
    pub mean_cost: Option<f64>,
    /// Draws of the batch plus the probes used to estimate its variance.
    pub cost_of_est: Option<u64>,
}

/// A point of a figure series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub series: String,
    pub k: u64,
    pub method: String,
    pub m: Option<u64>,
    pub value: f64,
}

/// Divergence demo output for one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergeRow {
    pub k: u64,
    /// `vᵀE(θ̄_k) = (1 − a^k)/(k(1 − a))·vᵀθ0`.
    pub closed_form: f64,
    /// `(1 − a^k)/(1 − a)·vᵀθ0 = vᵀE(Σ_{t<k} θ_t)`.
    pub sum_form: f64,
    pub simulated_mean: f64,
    pub simulated_se: f64,
    /// `(p/2)(vᵀE(θ̄_k))²`.
    pub lower_bound: f64,
}

/// Rows with the wall time spent on each.
#[derive(Debug, Clone, PartialEq)]
pub struct Report<T> {
    pub command: String,
    pub rows: Vec<T>,
    pub wall_times: Vec<f64>,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), rows: Vec::new(), wall_times: Vec::new() }
    }

    pub fn push(&mut self, row: T, wall_time: f64) {
        self.rows.push(row);
        self.wall_times.push(wall_time);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn write_json<W: Write, C: Serialize>(&self, config: &C, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Timed<'a, T> {
            #[serde(flatten)]
            row: &'a T,
            wall_time_s: f64,
        }
        #[derive(Serialize)]
        struct Doc<'a, C, T> {
            command: &'a str,
            config: &'a C,
            rows: Vec<Timed<'a, T>>,
        }
        let doc = Doc {
            command: &self.command,
            config,
            rows: self
                .rows
                .iter()
                .zip(&self.wall_times)
                .map(|(row, &wall_time_s)| Timed { row, wall_time_s })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut out, &doc)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Writes `path` as CSV and its `.json` sibling, or CSV to stdout when
    /// no path is given.
    pub fn emit<C: Serialize>(&self, config: &C, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => {
                self.write_csv(std::fs::File::create(p)?)?;
                self.write_json(config, std::fs::File::create(json_path(p))?)?;
            }
            None => self.write_csv(std::io::stdout().lock())?,
        }
        Ok(())
    }
}

pub fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Reads rows previously written by [`Report::write_csv`].
pub fn read_result_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_header() {
        let mut rep = Report::new("exact-bias");
        let row = ResultRow {
            command: "exact-bias".into(),
            model: "dist1".into(),
            k: 50,
            method: "Exact".into(),
            sq_bias: Some(6.382e-3),
            ..Default::default()
        };
        rep.push(row.clone(), 0.5);
        let text = rep.to_csv_string().unwrap();
        assert!(text.starts_with("command,model,k,method,n,"));
        assert!(!text.contains("wall"));
        assert!(!text.contains('\r'));

        let dir = std::env::temp_dir().join(format!("usgd-output-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rows.csv");
        rep.emit(&"cfg", Some(&path)).unwrap();
        assert_eq!(read_result_rows(&path).unwrap(), vec![row]);
        let json = std::fs::read_to_string(json_path(&path)).unwrap();
        assert!(json.contains("\"wall_time_s\": 0.5"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}

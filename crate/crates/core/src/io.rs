//! Plain-text formats for distributions, click data, model fixtures and
//! result tables. Headers are `#`-prefixed `key=value` lines; bins are
//! written 1-based. Floats use Rust's shortest round-trip formatting, so
//! every file re-imports to an equal value.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::analysis::{EpsilonBand, EpsilonEstimate, ExclusionPoint, ERROR_MODEL};
use crate::apparatus::{ClickCounts, ClickRecord, Outcome};
use crate::error::{Error, Result};
use crate::ontic_models::DiscreteOnticModel;
use crate::phase_model::Delta0Distribution;

pub const EXCLUSION_COLUMNS: &str = "d,q,delta0_threshold,epsilon_threshold,epsilon_stderr";
pub const EPSILON_COLUMNS: &str = "d,epsilon_expt,epsilon_stderr,expected,expected_low,expected_high";
pub const MEASURED_COLUMNS: &str = "d,epsilon,err";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Line cursor that tracks numbers for error messages.
struct Lines<'a> {
    source: &'a str,
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, source: &'a str) -> Self {
        Self {
            source,
            inner: text.lines().enumerate().peekable(),
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.source.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Next `#` line, as a key=value map. `None` once data begins.
    fn header(&mut self) -> Option<(usize, HashMap<&'a str, &'a str>)> {
        while let Some((_, l)) = self.inner.peek() {
            if l.trim().is_empty() {
                self.inner.next();
                continue;
            }
            let body = l.trim().strip_prefix('#')?;
            let (i, _) = self.inner.next()?;
            let map = body.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
            return Some((i + 1, map));
        }
        None
    }

    /// Key=value pairs from all leading header lines, plus the line of the first.
    fn headers(&mut self) -> Result<(usize, HashMap<&'a str, &'a str>)> {
        let mut all = HashMap::new();
        let mut first = None;
        while let Some((line, map)) = self.header() {
            first.get_or_insert(line);
            all.extend(map);
        }
        first.map(|l| (l, all)).ok_or_else(|| self.err(1, "missing '#' header"))
    }

    /// Next non-empty, non-comment line.
    fn data(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn field<T: FromStr>(&self, map: &HashMap<&str, &str>, key: &str, line: usize) -> Result<T> {
        let raw = map
            .get(key)
            .ok_or_else(|| self.err(line, format!("header lacks '{key}='")))?;
        raw.parse()
            .map_err(|_| self.err(line, format!("bad value '{raw}' for {key}")))
    }

    fn parse<T: FromStr>(&self, raw: &str, line: usize) -> Result<T> {
        raw.trim()
            .parse()
            .map_err(|_| self.err(line, format!("cannot parse '{}'", raw.trim())))
    }

    fn row<T: FromStr>(&self, text: &str, line: usize, width: usize) -> Result<Vec<T>> {
        let row: Vec<T> = text.split(',').map(|c| self.parse(c, line)).collect::<Result<_>>()?;
        if row.len() != width {
            return Err(self.err(line, format!("expected {width} columns, found {}", row.len())));
        }
        Ok(row)
    }

    fn expect_columns(&mut self, columns: &str) -> Result<()> {
        match self.data() {
            Some((_, l)) if l == columns => Ok(()),
            Some((n, l)) => Err(self.err(n, format!("expected column line '{columns}', found '{l}'"))),
            None => Err(self.err(0, "missing column line")),
        }
    }
}

pub fn write_distribution(dist: &Delta0Distribution) -> String {
    let mut out = format!(
        "# d={} n={} alpha2={} var={} seed={}\n",
        dist.dim(),
        dist.sample_count(),
        dist.mean_photons(),
        dist.step_variance(),
        dist.seed()
    );
    for x in dist.sorted_samples() {
        writeln!(out, "{x}").unwrap();
    }
    out
}

pub fn parse_distribution(text: &str, source: &str) -> Result<Delta0Distribution> {
    let mut lines = Lines::new(text, source);
    let (hl, h) = lines.headers()?;
    let d: usize = lines.field(&h, "d", hl)?;
    let n: usize = lines.field(&h, "n", hl)?;
    let alpha2: f64 = lines.field(&h, "alpha2", hl)?;
    let var: f64 = lines.field(&h, "var", hl)?;
    let seed: u64 = lines.field(&h, "seed", hl)?;
    let mut samples = Vec::with_capacity(n);
    while let Some((i, l)) = lines.data() {
        samples.push(lines.parse::<f64>(l, i)?);
    }
    if samples.len() != n {
        return Err(lines.err(hl, format!("header says n={n}, found {} samples", samples.len())));
    }
    Delta0Distribution::from_samples(d, alpha2, var, seed, samples)
}

fn outcome_text(o: Outcome) -> String {
    match o {
        Outcome::Bin(j) => (j + 1).to_string(),
        Outcome::NoClick => "-".to_string(),
    }
}

pub fn write_records(dim: usize, config_hash: &str, records: &[ClickRecord]) -> String {
    let mut out = format!("# d={dim} config_hash={config_hash}\n# trial_id,k,outcome\n");
    for r in records {
        writeln!(out, "{},{},{}", r.trial_id, r.prepared_k + 1, outcome_text(r.outcome)).unwrap();
    }
    out
}

/// Returns `(d, config_hash, records)`.
pub fn parse_records(text: &str, source: &str) -> Result<(usize, String, Vec<ClickRecord>)> {
    let mut lines = Lines::new(text, source);
    let (hl, h) = lines.headers()?;
    let d: usize = lines.field(&h, "d", hl)?;
    let hash: String = lines.field(&h, "config_hash", hl)?;
    let one_based = |lines: &Lines, raw: &str, i: usize| -> Result<usize> {
        let v: usize = lines.parse(raw, i)?;
        if v == 0 || v > d {
            return Err(lines.err(i, format!("bin {v} outside 1..={d}")));
        }
        Ok(v - 1)
    };
    let mut records = Vec::new();
    while let Some((i, l)) = lines.data() {
        let cols: Vec<&str> = l.split(',').map(str::trim).collect();
        let [id, k, o] = cols[..] else {
            return Err(lines.err(i, "expected trial_id,k,outcome"));
        };
        let outcome = if o == "-" {
            Outcome::NoClick
        } else {
            Outcome::Bin(one_based(&lines, o, i)?)
        };
        records.push(ClickRecord {
            trial_id: lines.parse(id, i)?,
            prepared_k: one_based(&lines, k, i)?,
            outcome,
        });
    }
    Ok((d, hash, records))
}

/// Row `k` holds `N(1..d, Q_k)` followed by the no-click tally.
pub fn write_counts(counts: &ClickCounts, config_hash: &str) -> String {
    let mut out = format!(
        "# d={} config_hash={config_hash}\n# rows: prepared k=1..d; columns: bins 1..d, no_click\n",
        counts.dim()
    );
    for (row, nc) in counts.counts().iter().zip(counts.no_clicks()) {
        for c in row {
            write!(out, "{c},").unwrap();
        }
        writeln!(out, "{nc}").unwrap();
    }
    out
}

/// Returns the counts and the config hash they were produced under.
pub fn parse_counts(text: &str, source: &str) -> Result<(ClickCounts, String)> {
    let mut lines = Lines::new(text, source);
    let (hl, h) = lines.headers()?;
    let d: usize = lines.field(&h, "d", hl)?;
    let hash: String = lines.field(&h, "config_hash", hl)?;
    let mut counts = Vec::with_capacity(d);
    let mut no_clicks = Vec::with_capacity(d);
    while let Some((i, l)) = lines.data() {
        let mut row: Vec<u64> = lines.row(l, i, d + 1)?;
        no_clicks.push(row.pop().unwrap_or_default());
        counts.push(row);
    }
    if counts.len() != d {
        return Err(lines.err(hl, format!("header says d={d}, found {} rows", counts.len())));
    }
    Ok((ClickCounts::new(counts, no_clicks)?, hash))
}

/// `K` preparation rows over `L` ontic states, then `L` response rows over
/// `d` click outcomes plus no-click.
pub fn write_model(model: &DiscreteOnticModel) -> String {
    let mut out = format!(
        "# K={} d={} L={}\n",
        model.preparation_count(),
        model.outcome_count(),
        model.ontic_count()
    );
    let mut block = |name: &str, rows: &[Vec<f64>]| {
        writeln!(out, "# {name}").unwrap();
        for row in rows {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
    };
    block("preparations", model.preparations());
    block("responses", model.responses());
    out
}

pub fn parse_model(text: &str, source: &str) -> Result<DiscreteOnticModel> {
    let mut lines = Lines::new(text, source);
    let (hl, h) = lines.headers()?;
    let k: usize = lines.field(&h, "K", hl)?;
    let d: usize = lines.field(&h, "d", hl)?;
    let l: usize = lines.field(&h, "L", hl)?;
    let mut take = |count: usize, width: usize| -> Result<Vec<Vec<f64>>> {
        (0..count)
            .map(|_| {
                let (i, row) = lines.data().ok_or_else(|| lines.err(0, "model fixture is truncated"))?;
                lines.row(row, i, width)
            })
            .collect()
    };
    let preparations = take(k, l)?;
    let responses = take(l, d + 1)?;
    if let Some((i, _)) = lines.data() {
        return Err(lines.err(i, "trailing rows after model"));
    }
    DiscreteOnticModel::new(preparations, responses)
}

pub fn write_exclusion(points: &[ExclusionPoint]) -> String {
    let mut out = format!("# error_model={}\n{EXCLUSION_COLUMNS}\n", ERROR_MODEL.replace(' ', "_"));
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.dim, p.q, p.delta0_threshold, p.epsilon_threshold, p.epsilon_std_error
        )
        .unwrap();
    }
    out
}

pub fn parse_exclusion(text: &str, source: &str) -> Result<Vec<ExclusionPoint>> {
    let mut lines = Lines::new(text, source);
    lines.expect_columns(EXCLUSION_COLUMNS)?;
    let mut points = Vec::new();
    while let Some((i, l)) = lines.data() {
        let cols: Vec<&str> = l.split(',').collect();
        let [d, q, d0, eps, err] = cols[..] else {
            return Err(lines.err(i, "expected 5 columns"));
        };
        points.push(ExclusionPoint {
            dim: lines.parse(d, i)?,
            q: lines.parse(q, i)?,
            delta0_threshold: lines.parse(d0, i)?,
            epsilon_threshold: lines.parse(eps, i)?,
            epsilon_std_error: lines.parse(err, i)?,
        });
    }
    Ok(points)
}

/// One row of the epsilon-versus-d table.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonRow {
    pub dim: usize,
    pub measured: EpsilonEstimate,
    pub expected: EpsilonBand,
}

pub fn write_epsilon_table(rows: &[EpsilonRow]) -> String {
    let mut out = format!("# error_model={}\n{EPSILON_COLUMNS}\n", ERROR_MODEL.replace(' ', "_"));
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.dim, r.measured.value, r.measured.std_error, r.expected.central, r.expected.low, r.expected.high
        )
        .unwrap();
    }
    out
}

/// Reads back the table; per-k terms are not stored, so estimates come back
/// as summaries.
pub fn parse_epsilon_table(text: &str, source: &str) -> Result<Vec<EpsilonRow>> {
    let mut lines = Lines::new(text, source);
    lines.expect_columns(EPSILON_COLUMNS)?;
    let mut rows = Vec::new();
    while let Some((i, l)) = lines.data() {
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 6 {
            return Err(lines.err(i, "expected 6 columns"));
        }
        let v: Vec<f64> = cols[1..].iter().map(|c| lines.parse(c, i)).collect::<Result<_>>()?;
        rows.push(EpsilonRow {
            dim: lines.parse(cols[0], i)?,
            measured: EpsilonEstimate::from_summary(v[0], v[1]),
            expected: EpsilonBand {
                central: v[2],
                low: v[3],
                high: v[4],
            },
        });
    }
    Ok(rows)
}

/// `d,epsilon,err` rows of externally measured values.
pub fn parse_measured_epsilon(text: &str, source: &str) -> Result<Vec<(usize, EpsilonEstimate)>> {
    let mut lines = Lines::new(text, source);
    lines.expect_columns(MEASURED_COLUMNS)?;
    let mut rows = Vec::new();
    while let Some((i, l)) = lines.data() {
        let cols: Vec<&str> = l.split(',').collect();
        let [d, e, err] = cols[..] else {
            return Err(lines.err(i, "expected d,epsilon,err"));
        };
        rows.push((
            lines.parse(d, i)?,
            EpsilonEstimate::from_summary(lines.parse(e, i)?, lines.parse(err, i)?),
        ));
    }
    if rows.is_empty() {
        return Err(lines.err(0, "no measured rows"));
    }
    Ok(rows)
}

pub fn write_measured_epsilon(rows: &[(usize, EpsilonEstimate)]) -> String {
    let mut out = format!("{MEASURED_COLUMNS}\n");
    for (d, e) in rows {
        writeln!(out, "{d},{},{}", e.value, e.std_error).unwrap();
    }
    out
}

//! Per-second, per-station traffic traces: CSV loading, synthetic
//! generation, activity counts and autocorrelation.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Download volumes in bytes/s, one row per second, one column per station.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub station_ids: Vec<String>,
    /// Timestamp column, strictly increasing.
    pub timestamps: Vec<u64>,
    /// `volumes[t][i]`: bytes delivered to station `i` in second `t`.
    pub volumes: Vec<Vec<u64>>,
}

impl Trace {
    pub fn new(station_ids: Vec<String>, timestamps: Vec<u64>, volumes: Vec<Vec<u64>>) -> Result<Self> {
        if timestamps.len() != volumes.len() {
            return Err(Error::domain("one timestamp per row required"));
        }
        if let Some(row) = volumes.iter().find(|r| r.len() != station_ids.len()) {
            return Err(Error::domain(format!(
                "row has {} columns, expected {}",
                row.len(),
                station_ids.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("timestamps must be strictly increasing"));
        }
        Ok(Trace {
            station_ids,
            timestamps,
            volumes,
        })
    }

    /// Trace with default station names and timestamps `0..T`.
    pub fn from_volumes(volumes: Vec<Vec<u64>>) -> Result<Self> {
        let n = volumes.first().map_or(0, Vec::len);
        let ids = (0..n).map(|i| format!("station_{i}")).collect();
        let ts = (0..volumes.len() as u64).collect();
        Self::new(ids, ts, volumes)
    }

    pub fn n_stations(&self) -> usize {
        self.station_ids.len()
    }

    pub fn seconds(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_active(&self, t: usize, station: usize) -> bool {
        self.volumes[t][station] > 0
    }

    pub fn activity(&self) -> Vec<Vec<bool>> {
        self.volumes
            .iter()
            .map(|row| row.iter().map(|&v| v > 0).collect())
            .collect()
    }

    /// Rows `[start, start + len)` as a new trace.
    pub fn window(&self, start: usize, len: usize) -> Result<Trace> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.seconds())
            .ok_or_else(|| Error::domain(format!("window {start}+{len} exceeds trace")))?;
        Ok(Trace {
            station_ids: self.station_ids.clone(),
            timestamps: self.timestamps[start..end].to_vec(),
            volumes: self.volumes[start..end].to_vec(),
        })
    }

    /// Activity-count series `a(t)`.
    pub fn active_counts(&self) -> Vec<u32> {
        self.volumes
            .iter()
            .map(|row| row.iter().filter(|&&v| v > 0).count() as u32)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let header = std::iter::once("t".to_string()).chain(self.station_ids.iter().cloned());
        w.write_record(header).map_err(csv_err)?;
        for (ts, row) in self.timestamps.iter().zip(&self.volumes) {
            let rec = std::iter::once(ts.to_string()).chain(row.iter().map(u64::to_string));
            w.write_record(rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<trace writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(line, e.to_string())
}

/// Read a trace from `path`.
pub fn load_trace(path: &Path) -> Result<Trace> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(f)
}

/// Parse the trace CSV: header `t,station_0,...`, rows `second,bytes,...`.
pub fn read_trace<R: Read>(input: R) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(Error::parse(1, "empty trace file")),
    };
    if header.get(0).map(str::trim) != Some("t") {
        return Err(Error::parse(1, "header must start with column `t`"));
    }
    if header.len() < 2 {
        return Err(Error::parse(1, "header names no stations"));
    }
    let station_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let width = header.len();

    let mut timestamps = Vec::new();
    let mut volumes = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::parse(
                line,
                format!("ragged row: {} fields, header has {width}", rec.len()),
            ));
        }
        let ts = parse_cell(&rec[0], line, "t")?;
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(Error::parse(
                    line,
                    format!("timestamp {ts} does not increase (previous {prev})"),
                ));
            }
        }
        let row = rec
            .iter()
            .skip(1)
            .zip(&station_ids)
            .map(|(cell, id)| parse_cell(cell, line, id))
            .collect::<Result<Vec<_>>>()?;
        timestamps.push(ts);
        volumes.push(row);
    }
    if volumes.is_empty() {
        return Err(Error::parse(1, "trace has a header but no rows"));
    }
    Ok(Trace {
        station_ids,
        timestamps,
        volumes,
    })
}

fn parse_cell(cell: &str, line: u64, column: &str) -> Result<u64> {
    let cell = cell.trim();
    if cell.starts_with('-') {
        return Err(Error::parse(
            line,
            format!("negative value {cell} in column {column}"),
        ));
    }
    cell.parse::<u64>().map_err(|_| {
        Error::parse(line, format!("invalid value `{cell}` in column {column}"))
    })
}

/// Count of active stations at second `t`.
pub fn active_count(trace: &Trace, t: usize) -> Result<u32> {
    let row = trace.volumes.get(t).ok_or_else(|| {
        Error::domain(format!("second {t} outside trace of {} s", trace.seconds()))
    })?;
    Ok(row.iter().filter(|&&v| v > 0).count() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Draw from the chain's stationary distribution.
    #[default]
    Stationary,
    On,
    Off,
}

/// Two-state on/off Markov source per station, log-normal volume when on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_stations: usize,
    pub duration_s: usize,
    /// Per-station `(p_on_to_off, p_off_to_on)`.
    pub transitions: Vec<(f64, f64)>,
    /// Mean of ln(bytes/s) during on-seconds.
    pub volume_mu: f64,
    /// Std-dev of ln(bytes/s) during on-seconds.
    pub volume_sigma: f64,
    #[serde(default)]
    pub initial: InitialState,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        // Stationary on-probability 0.6 with long on/off runs keeps roughly
        // 4-8 of 8 stations busy in loaded stretches.
        Self::uniform(8, 3600, 0.04, 0.06, 1)
    }
}

impl GenParams {
    pub fn uniform(n: usize, duration_s: usize, p_on_to_off: f64, p_off_to_on: f64, seed: u64) -> Self {
        GenParams {
            n_stations: n,
            duration_s,
            transitions: vec![(p_on_to_off, p_off_to_on); n],
            volume_mu: (2.0e6f64).ln(),
            volume_sigma: 1.0,
            initial: InitialState::Stationary,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != self.n_stations {
            return Err(Error::domain("one transition pair per station required"));
        }
        for &(a, b) in &self.transitions {
            if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
                return Err(Error::domain("transition probabilities must lie in [0, 1]"));
            }
        }
        if !self.volume_mu.is_finite() || !self.volume_sigma.is_finite() || self.volume_sigma < 0.0 {
            return Err(Error::domain("volume mu/sigma must be finite, sigma >= 0"));
        }
        Ok(())
    }
}

pub fn generate_trace(params: &GenParams) -> Result<Trace> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let volume = LogNormal::new(params.volume_mu, params.volume_sigma)
        .map_err(|e| Error::domain(e.to_string()))?;
    let mut on: Vec<bool> = params
        .transitions
        .iter()
        .map(|&(off, on)| match params.initial {
            InitialState::On => true,
            InitialState::Off => false,
            InitialState::Stationary => {
                let pi_on = if off + on > 0.0 { on / (off + on) } else { 0.5 };
                rng.random_bool(pi_on)
            }
        })
        .collect();
    let mut volumes = Vec::with_capacity(params.duration_s);
    for t in 0..params.duration_s {
        if t > 0 {
            for (state, &(p_off, p_on)) in on.iter_mut().zip(&params.transitions) {
                let flip = if *state { p_off } else { p_on };
                if rng.random_bool(flip) {
                    *state = !*state;
                }
            }
        }
        let row = on
            .iter()
            .map(|&s| {
                if s {
                    (volume.sample(&mut rng).round() as u64).max(1)
                } else {
                    0
                }
            })
            .collect();
        volumes.push(row);
    }
    Trace::from_volumes(volumes).map(|mut tr| {
        if params.n_stations == 0 {
            tr.station_ids.clear();
        }
        tr
    })
}

/// Sample autocorrelation at lags `0..=max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag < 1 || series.len() <= max_lag {
        return Err(Error::domain(format!(
            "need len > max_lag >= 1 (len {}, max_lag {max_lag})",
            series.len()
        )));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::undefined("autocorrelation of a constant series"));
    }
    Ok((0..=max_lag)
        .map(|k| dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Trace> {
        read_trace(s.as_bytes())
    }

    #[test]
    fn activity_from_volumes() {
        let tr = parse("t,station_0,station_1\n0,0,10\n1,5,0\n2,0,0\n").unwrap();
        assert_eq!(
            tr.activity(),
            vec![vec![false, true], vec![true, false], vec![false, false]]
        );
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(parse(""), Err(Error::Parse { line: 1, .. })));
        let e = parse("t,a,b\n0,1,2\n1,3,-4\n").unwrap_err();
        match e {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("-4") && message.contains('b'), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("t,a,b\n0,1,2\n1,3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("t,a\n0,1\n0,2\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("t,a\n5,1\n3,2\n"), Err(Error::Parse { line: 3, .. })));
        assert!(parse("x,a\n0,1\n").is_err());
    }

    #[test]
    fn active_count_rows() {
        let tr = Trace::from_volumes(vec![
            vec![0, 1, 2, 0],
            vec![0; 4],
            vec![3; 4],
        ])
        .unwrap();
        assert_eq!(active_count(&tr, 0).unwrap(), 2);
        assert_eq!(active_count(&tr, 1).unwrap(), 0);
        assert_eq!(active_count(&tr, 2).unwrap(), 4);
        assert!(active_count(&tr, 3).is_err());
        let eight = Trace::from_volumes(vec![vec![9; 8]]).unwrap();
        assert_eq!(active_count(&eight, 0).unwrap(), 8);
    }

    #[test]
    fn absorbing_and_alternating_chains() {
        let mut p = GenParams::uniform(1, 200, 0.0, 0.5, 3);
        p.initial = InitialState::On;
        let tr = generate_trace(&p).unwrap();
        assert!(tr.activity().iter().all(|r| r[0]));

        let mut p = GenParams::uniform(1, 50, 1.0, 1.0, 3);
        p.initial = InitialState::Off;
        let act: Vec<bool> = generate_trace(&p).unwrap().activity().iter().map(|r| r[0]).collect();
        for (t, a) in act.iter().enumerate() {
            assert_eq!(*a, t % 2 == 1);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let p = GenParams::uniform(4, 300, 0.1, 0.2, 42);
        assert_eq!(generate_trace(&p).unwrap(), generate_trace(&p).unwrap());
        let q = GenParams { seed: 43, ..p.clone() };
        assert_ne!(generate_trace(&p).unwrap(), generate_trace(&q).unwrap());
    }

    #[test]
    fn acf_edge_cases() {
        assert!(acf(&[1.0, 2.0], 2).is_err());
        assert!(acf(&[1.0, 2.0, 3.0], 0).is_err());
        assert!(matches!(acf(&[4.0; 10], 1), Err(Error::Undefined(_))));
        let r = acf(&[1.0, 3.0, 2.0, 5.0, 4.0], 2).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
    }
}

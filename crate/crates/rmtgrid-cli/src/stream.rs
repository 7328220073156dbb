//! The canonical stream file: a CSV with header `t,<sensor...>`, one row per
//! sample instant, plus an optional JSON metadata sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rmtgrid::linalg::DataMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub sampling_hz: f64,
    pub units: String,
    pub source: String,
}

/// A multichannel stream held as an `N×len` matrix, one row per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFile {
    pub sensors: Vec<String>,
    pub times: Vec<f64>,
    pub data: DataMatrix,
}

impl StreamFile {
    pub fn new(sensors: Vec<String>, times: Vec<f64>, data: DataMatrix) -> CliResult<Self> {
        if data.is_complex() {
            return Err(CliError::Config("stream data must be real".into()));
        }
        if data.shape() != (sensors.len(), times.len()) {
            return Err(CliError::Config(format!(
                "stream has {} sensors and {} instants but data is {:?}",
                sensors.len(),
                times.len(),
                data.shape()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config("stream times must be strictly increasing".into()));
        }
        Ok(Self { sensors, times, data })
    }

    /// Sensors named `prefix1..prefixN`.
    pub fn numbered(prefix: &str, times: Vec<f64>, data: DataMatrix) -> CliResult<Self> {
        let sensors = (1..=data.rows()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(sensors, times, data)
    }

    /// Median spacing of the time column, inverted.
    pub fn inferred_hz(&self) -> Option<f64> {
        let mut d: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        Some(1.0 / d[d.len() / 2])
    }
}

/// Path of the metadata sidecar for a stream file: `x.csv` → `x.meta.json`.
pub fn sidecar_path(stream: &Path) -> PathBuf {
    stream.with_extension("meta.json")
}

pub fn read_stream(path: &Path) -> CliResult<StreamFile> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(CliError::parse(path, 1, "empty file, expected header 't,<sensor...>'")),
        Some(r) => r.map_err(|e| csv_error(path, e))?,
    };
    if header.get(0) != Some("t") {
        return Err(CliError::parse(path, 1, "first header column must be 't'"));
    }
    if header.len() < 2 {
        return Err(CliError::parse(path, 1, "header names no sensors"));
    }
    let sensors: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = sensors.len();
    let mut times = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(CliError::parse(path, line, format!("expected {} columns, found {}", n + 1, rec.len())));
        }
        let mut vals = rec.iter().enumerate().map(|(k, s)| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::parse(path, line, format!("column {}: '{s}' is not a finite number", k + 1)))
        });
        let t = vals.next().expect("nonempty record")?;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(CliError::parse(path, line, format!("t = {t} does not increase (previous {prev})")));
            }
        }
        times.push(t);
        for v in vals {
            rows.push(v?);
        }
    }
    if times.is_empty() {
        return Err(CliError::parse(path, 2, "no samples after the header"));
    }
    // rows are sample-major; the matrix is sensor-major
    let len = times.len();
    let data = DataMatrix::from_fn_real(n, len, |i, k| rows[k * n + i])?;
    StreamFile::new(sensors, times, data)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::parse(path, line, e.to_string())
}

/// Writes `stream` as CSV. Numbers use the shortest decimal that parses back to
/// the same `f64` (at most 17 significant digits).
pub fn write_stream(path: &Path, stream: &StreamFile) -> CliResult<()> {
    let mut out = String::with_capacity(stream.times.len() * (stream.sensors.len() + 1) * 20);
    out.push('t');
    for s in &stream.sensors {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for (k, t) in stream.times.iter().enumerate() {
        out.push_str(&t.to_string());
        for i in 0..stream.sensors.len() {
            out.push(',');
            out.push_str(&stream.data.get(i, k).re.to_string());
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_meta(stream_path: &Path, meta: &StreamMeta) -> CliResult<()> {
    write_atomic(&sidecar_path(stream_path), serde_json::to_string_pretty(meta)?.as_bytes())
}

/// Reads the sidecar next to `stream_path`, if there is one.
pub fn read_meta(stream_path: &Path) -> CliResult<Option<StreamMeta>> {
    let p = sidecar_path(stream_path);
    match fs::read_to_string(&p) {
        Ok(s) => Ok(Some(serde_json::from_str(&s)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::io(p, e)),
    }
}

/// Writes to a temporary file in the target directory, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("rmtgrid-stream-{}-{name}", std::process::id()))
    }

    #[test]
    fn round_trip_is_exact() {
        let data = DataMatrix::from_rows(&[vec![0.1, 1.0 / 3.0, -2.5e-300], vec![f64::MAX, 1e17 + 8.0, -0.0]]).unwrap();
        let s = StreamFile::numbered("v", vec![0.5, 1.0, 1.7], data).unwrap();
        let p = tmp("rt.csv");
        write_stream(&p, &s).unwrap();
        let back = read_stream(&p).unwrap();
        fs::remove_file(&p).unwrap();
        assert_eq!(back.sensors, s.sensors);
        assert_eq!(back.times, s.times);
        for i in 0..2 {
            for k in 0..3 {
                assert_eq!(back.data.get(i, k).re.to_bits(), s.data.get(i, k).re.to_bits());
            }
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("", 1),
            ("t,a\n", 2),
            ("x,a\n1,2\n", 1),
            ("t,a\n1,2\n2,abc\n", 3),
            ("t,a\n1,2\n2,3,4\n", 3),
            ("t,a,b\n1,2,3\n1,3,4\n", 3),
            ("t,a\n1,2\n2,inf\n", 3),
        ];
        for (text, want) in cases {
            let p = tmp("bad.csv");
            fs::write(&p, text).unwrap();
            let err = read_stream(&p).unwrap_err();
            fs::remove_file(&p).unwrap();
            match err {
                CliError::Parse { line, .. } => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other}"),
            }
        }
    }

    #[test]
    fn sidecar_next_to_stream() {
        assert_eq!(sidecar_path(Path::new("out/x.csv")), PathBuf::from("out/x.meta.json"));
        let p = tmp("m.csv");
        assert_eq!(read_meta(&p).unwrap(), None);
        let m = StreamMeta { sampling_hz: 1.0, units: "p.u.".into(), source: "test".into() };
        write_meta(&p, &m).unwrap();
        assert_eq!(read_meta(&p).unwrap(), Some(m));
        fs::remove_file(sidecar_path(&p)).unwrap();
    }

    #[test]
    fn inferred_rate() {
        let s = StreamFile::numbered("v", vec![0.0, 0.02, 0.04], DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap()).unwrap();
        assert!((s.inferred_hz().unwrap() - 50.0).abs() < 1e-9);
    }
}

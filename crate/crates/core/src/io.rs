//! File formats: Bloch samples and curves as CSV, states as JSON lines,
//! reports as JSON. Writes go through a temp file and a rename.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::blr::BlrCurve;
use crate::error::{Error, Result};
use crate::state::{BlochVector, CMatrix, DensityMatrix};

/// Writes `path` by filling a sibling temp file and renaming it into place.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BlochRow {
    x: f64,
    y: f64,
    z: f64,
}

pub fn write_bloch_csv(path: &Path, samples: &[BlochVector]) -> Result<()> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        for b in samples {
            c.serialize(BlochRow { x: b.x, y: b.y, z: b.z })?;
        }
        c.flush()?;
        Ok(())
    })
}

pub fn read_bloch_csv(path: &Path) -> Result<Vec<BlochVector>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<BlochRow>()
        .map(|row| row.map(|b| BlochVector::new(b.x, b.y, b.z)).map_err(Error::from))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    lambda: f64,
    size: f64,
    credibility_empirical: f64,
    credibility_theoretical: f64,
}

pub fn write_curve_csv(path: &Path, curve: &BlrCurve) -> Result<()> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        for i in 0..curve.lambdas.len() {
            c.serialize(CurveRow {
                lambda: curve.lambdas[i],
                size: curve.size[i],
                credibility_empirical: curve.credibility_empirical[i],
                credibility_theoretical: curve.credibility_theoretical[i],
            })?;
        }
        c.flush()?;
        Ok(())
    })
}

pub fn read_curve_csv(path: &Path) -> Result<BlrCurve> {
    let mut r = csv::Reader::from_path(path)?;
    let mut curve = BlrCurve {
        lambdas: vec![],
        size: vec![],
        credibility_empirical: vec![],
        credibility_theoretical: vec![],
    };
    for row in r.deserialize::<CurveRow>() {
        let row = row?;
        curve.lambdas.push(row.lambda);
        curve.size.push(row.size);
        curve.credibility_empirical.push(row.credibility_empirical);
        curve.credibility_theoretical.push(row.credibility_theoretical);
    }
    Ok(curve)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in rows {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// One state per line: {"re": rows, "im": rows}.
#[derive(Serialize, Deserialize)]
struct MatrixLine {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

pub fn write_states_jsonl(path: &Path, states: &[DensityMatrix]) -> Result<()> {
    write_atomic(path, |w| {
        for s in states {
            let m = s.matrix();
            let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
            };
            let line = MatrixLine {
                re: rows(|z| z.re),
                im: rows(|z| z.im),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_states_jsonl(path: &Path) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let m: MatrixLine = serde_json::from_str(&line)?;
        let d = m.re.len();
        if m.im.len() != d || m.re.iter().chain(&m.im).any(|r| r.len() != d) {
            return Err(Error::InvalidInput("state line is not a square matrix".into()));
        }
        let mat = CMatrix::from_fn(d, d, |i, j| Complex64::new(m.re[i][j], m.im[i][j]));
        out.push(DensityMatrix::new(mat)?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

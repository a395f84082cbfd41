//! Dense matrix files: CSV (row-major, optional header, `#` comments) and the
//! binary `BDR1` layout (magic, u64 LE rows, u64 LE cols, f64 LE payload).

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const BINARY_MAGIC: &[u8; 4] = b"BDR1";

pub fn read_matrix_csv<T: Real>(path: &Path) -> Result<Matrix<T>> {
    let file = fs::File::open(path)?;
    parse_matrix_csv(std::io::BufReader::new(file))
}

pub fn parse_matrix_csv<T: Real, R: BufRead>(reader: R) -> Result<Matrix<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => rows.push(vals.into_iter().map(T::c).collect()),
            // A non-numeric first record is a header.
            Err(_) if rows.is_empty() && line == 0 => continue,
            Err(e) => {
                return Err(Error::Format(format!("record {}: {e}", line + 1)));
            }
        }
    }
    Matrix::from_rows(&rows).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_matrix_csv<T: Real, W: Write>(out: W, m: &Matrix<T>, header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(h) = header {
        w.write_record(h).map_err(|e| Error::Format(e.to_string()))?;
    }
    for i in 0..m.rows() {
        let rec: Vec<String> = m.row(i).iter().map(|v| format_real(*v)).collect();
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip decimal representation.
pub fn format_real<T: Real>(v: T) -> String {
    format!("{:?}", v.to_f64_lossy())
}

pub fn read_vector_csv<T: Real>(path: &Path) -> Result<Vec<T>> {
    let m: Matrix<T> = read_matrix_csv(path)?;
    if m.cols() == 1 || m.rows() == 1 {
        Ok(m.into_vec())
    } else {
        Err(Error::Format(format!("expected a vector, found a {}x{} matrix", m.rows(), m.cols())))
    }
}

pub fn encode_matrix_binary<T: Real>(m: &Matrix<T>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(20 + 8 * m.as_slice().len());
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.as_slice() {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    buf
}

pub fn decode_matrix_binary<T: Real>(bytes: &[u8]) -> Result<Matrix<T>> {
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing BDR1 header".into()));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let payload = &bytes[20..];
    if payload.len() != n * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header implies {}",
            payload.len(),
            n * 8
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| T::c(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn read_matrix_binary<T: Real>(path: &Path) -> Result<Matrix<T>> {
    decode_matrix_binary(&fs::read(path)?)
}

pub fn write_matrix_binary<T: Real>(path: &Path, m: &Matrix<T>) -> Result<()> {
    fs::write(path, encode_matrix_binary(m))?;
    Ok(())
}

/// Reads either format, choosing by the magic bytes.
pub fn read_matrix<T: Real>(path: &Path) -> Result<Matrix<T>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_matrix_binary(&bytes)
    } else {
        parse_matrix_csv(std::io::Cursor::new(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header_and_comments() {
        let text = "# produced elsewhere\na,b\n1, 2\n3,4.5\n";
        let m: Matrix<f64> = parse_matrix_csv(text.as_bytes()).unwrap();
        assert_eq!(m, Matrix::from_f64_rows(&[&[1.0, 2.0], &[3.0, 4.5]]));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = Matrix::<f64>::from_f64_rows(&[&[0.1, -1e-300], &[std::f64::consts::PI, 7.0]]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m, None).unwrap();
        let back: Matrix<f64> = parse_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ragged_csv_is_rejected() {
        let r: Result<Matrix<f64>> = parse_matrix_csv("1,2\n3\n".as_bytes());
        assert!(r.is_err());
    }

    #[test]
    fn binary_round_trip() {
        let m = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.5]]);
        let bytes = encode_matrix_binary(&m);
        assert_eq!(&bytes[..4], b"BDR1");
        assert_eq!(bytes.len(), 20 + 48);
        assert_eq!(decode_matrix_binary::<f64>(&bytes).unwrap(), m);
        assert!(decode_matrix_binary::<f64>(&bytes[..30]).is_err());
    }

    #[test]
    fn read_matrix_detects_format() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::<f64>::from_f64_rows(&[&[1.5, -2.0]]);
        let bin = dir.path().join("m.bin");
        write_matrix_binary(&bin, &m).unwrap();
        assert_eq!(read_matrix::<f64>(&bin).unwrap(), m);
        let csvp = dir.path().join("m.csv");
        write_matrix_csv(fs::File::create(&csvp).unwrap(), &m, None).unwrap();
        assert_eq!(read_matrix::<f64>(&csvp).unwrap(), m);
    }
}

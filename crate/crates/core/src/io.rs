//! KMAT binary matrices and CSV output.
//!
//! A KMAT file is the six bytes `KMAT1\n`, then `n_rows` and `n_cols` as
//! little-endian `u64`, then the entries row-major as little-endian `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

pub const KMAT_MAGIC: &[u8; 6] = b"KMAT1\n";
const HEADER_LEN: usize = 6 + 16;

pub fn encode_kmat<T: Scalar>(k: &DenseMatrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * k.data().len());
    out.extend_from_slice(KMAT_MAGIC);
    out.extend_from_slice(&(k.n_rows() as u64).to_le_bytes());
    out.extend_from_slice(&(k.n_cols() as u64).to_le_bytes());
    for &x in k.data() {
        out.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_kmat<T: Scalar>(bytes: &[u8]) -> Result<DenseMatrix<T>> {
    if bytes.len() < 6 || &bytes[..6] != KMAT_MAGIC {
        if bytes.len() >= 4 && &bytes[..4] == b"KMAT" {
            let tag = bytes[4..bytes.len().min(6)]
                .iter()
                .take_while(|&&b| b != b'\n')
                .map(|&b| b as char)
                .collect();
            return Err(Error::UnsupportedVersion(tag));
        }
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u64::from_le_bytes(bytes[6 + 8 * i..14 + 8 * i].try_into().unwrap());
    let (n_rows, n_cols) = (word(0) as usize, word(1) as usize);
    let count = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| Error::invalid("KMAT dimensions overflow"))?;
    let expected = HEADER_LEN + 8 * count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[HEADER_LEN..expected]
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    DenseMatrix::from_vec(n_rows, n_cols, data)
}

pub fn write_kmat<T: Scalar>(path: impl AsRef<Path>, k: &DenseMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_kmat(k))?;
    w.flush()?;
    Ok(())
}

pub fn read_kmat<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseMatrix<T>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_kmat(&bytes)
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes rows of numbers as CSV with an optional header line.
pub fn write_csv<W: Write>(mut w: W, header: Option<&[&str]>, rows: &[Vec<f64>]) -> Result<()> {
    if let Some(h) = header {
        writeln!(w, "{}", h.join(","))?;
    }
    for r in rows {
        let line: Vec<String> = r.iter().map(|&x| format_f64(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(
    path: impl AsRef<Path>,
    header: Option<&[&str]>,
    rows: &[Vec<f64>],
) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), header, rows)
}

/// Reads a numeric CSV, skipping a first line that does not parse as numbers.
pub fn read_csv<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::invalid(format!("CSV line {}: {e}", i + 1))),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix<f64> {
        DenseMatrix::from_vec(2, 3, vec![1.0, -0.0, 1e-300, f64::MAX, 0.1, -7.25]).unwrap()
    }

    #[test]
    fn round_trip_bit_identical() {
        let k = sample();
        let back: DenseMatrix<f64> = decode_kmat(&encode_kmat(&k)).unwrap();
        assert_eq!(back.shape(), (2, 3));
        for (a, b) in k.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.kmat");
        write_kmat(&p, &sample()).unwrap();
        let back: DenseMatrix<f64> = read_kmat(&p).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn distinct_errors() {
        let mut bytes = encode_kmat(&sample());
        assert!(matches!(
            decode_kmat::<f64>(b"NOPE1\n"),
            Err(Error::BadMagic)
        ));
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            decode_kmat::<f64>(truncated),
            Err(Error::Truncated { .. })
        ));
        bytes[4] = b'2';
        assert!(
            matches!(decode_kmat::<f64>(&bytes), Err(Error::UnsupportedVersion(v)) if v == "2")
        );
        assert!(matches!(
            read_kmat::<f64>("/nonexistent/x.kmat"),
            Err(Error::MissingArtifact(_))
        ));
    }

    #[test]
    fn csv_round_trip_17_digits() {
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-17, std::f64::consts::PI]];
        let mut buf = Vec::new();
        write_csv(&mut buf, Some(&["x", "y"]), &rows).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }
}

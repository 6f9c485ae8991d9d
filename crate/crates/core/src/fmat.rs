//! Matrix file codecs.
//!
//! Two interchangeable on-disk representations are supported:
//!
//! * `FMAT`, a binary format: magic bytes `FMAT`, version byte `0x01`, then
//!   `u32` little-endian row count `d`, `u32` little-endian column count `N`,
//!   then `d * N` IEEE-754 little-endian `f64` values in column-major order
//!   (sample `j` contiguous).
//! * CSV: first row `d,N`, then `N` rows of `d` comma-separated decimal
//!   values, one row per sample.
//!
//! Both round-trip bit-exactly. All writers go through a temp file plus
//! rename so a crashed run never leaves a truncated artifact behind.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};

use crate::error::{Error, Result};

pub const FMAT_MAGIC: [u8; 4] = *b"FMAT";
pub const FMAT_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 13;

/// On-disk matrix representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Fmat,
    Csv,
}

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn check_finite(m: &ArrayView2<f64>, path: &Path) -> Result<()> {
    for ((i, j), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: i,
                col: j,
                path: Some(path.to_path_buf()),
            });
        }
    }
    Ok(())
}

/// Serializes `m` to `path` in the FMAT binary format.
pub fn write_fmat(path: &Path, m: &ArrayView2<f64>) -> Result<()> {
    check_finite(m, path)?;
    let (d, n) = m.dim();
    let d32 = u32::try_from(d)
        .map_err(|_| Error::InvalidArgument(format!("matrix rows {d} exceed FMAT u32 header")))?;
    let n32 = u32::try_from(n)
        .map_err(|_| Error::InvalidArgument(format!("matrix cols {n} exceed FMAT u32 header")))?;

    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * d * n);
    buf.extend_from_slice(&FMAT_MAGIC);
    buf.push(FMAT_VERSION);
    buf.extend_from_slice(&d32.to_le_bytes());
    buf.extend_from_slice(&n32.to_le_bytes());
    for j in 0..n {
        for i in 0..d {
            buf.extend_from_slice(&m[[i, j]].to_le_bytes());
        }
    }
    atomic_write(path, &buf)
}

/// Reads an FMAT file into a column-major matrix.
pub fn read_fmat(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("file holds {} bytes, header needs {HEADER_LEN}", bytes.len()),
        });
    }
    if bytes[0..4] != FMAT_MAGIC {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("bad magic {:?}, expected `FMAT`", &bytes[0..4]),
        });
    }
    if bytes[4] != FMAT_VERSION {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("unsupported version {:#04x}", bytes[4]),
        });
    }
    let d = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = HEADER_LEN as u64 + 8 * d as u64 * n as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!(
                "header implies {expected} bytes for a {d}x{n} matrix, file holds {}",
                bytes.len()
            ),
        });
    }

    let mut data = Vec::with_capacity(d * n);
    for (idx, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: idx % d,
                col: idx / d,
                path: Some(path.to_path_buf()),
            });
        }
        data.push(v);
    }
    Ok(Array2::from_shape_vec((d, n).f(), data).expect("payload length checked against header"))
}

/// Serializes `m` to `path` as CSV (`d,N` header, then one row per sample).
pub fn write_csv_matrix(path: &Path, m: &ArrayView2<f64>) -> Result<()> {
    check_finite(m, path)?;
    let (d, n) = m.dim();
    let mut out = String::new();
    out.push_str(&format!("{d},{n}\n"));
    let mut fields: Vec<String> = Vec::with_capacity(d);
    for j in 0..n {
        fields.clear();
        fields.extend((0..d).map(|i| m[[i, j]].to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Reads a CSV matrix written by [`write_csv_matrix`].
pub fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: "empty file".into(),
    })?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("first row must be `d,N`, got `{header}`"),
        });
    }
    let parse_dim = |s: &str, what: &str| -> Result<usize> {
        s.trim().parse::<usize>().map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("{what} `{s}` is not a non-negative integer"),
        })
    };
    let d = parse_dim(dims[0], "row count")?;
    let n = parse_dim(dims[1], "column count")?;

    let mut m = Array2::zeros((d, n).f());
    let mut seen = 0usize;
    for (line_idx, line) in lines.enumerate() {
        let line_no = line_idx + 2; // 1-based, after the header
        if seen == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("expected {n} sample rows, found extra data"),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("expected {d} values, got {}", fields.len()),
            });
        }
        for (i, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: seen,
                    path: Some(path.to_path_buf()),
                });
            }
            m[[i, seen]] = v;
        }
        seen += 1;
    }
    if seen != n {
        return Err(Error::dim(
            format!("sample rows in {}", path.display()),
            n.to_string(),
            seen.to_string(),
        ));
    }
    Ok(m)
}

/// Writes a matrix in the requested format.
pub fn write_matrix(path: &Path, m: &ArrayView2<f64>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Fmat => write_fmat(path, m),
        MatrixFormat::Csv => write_csv_matrix(path, m),
    }
}

/// Reads a matrix, sniffing the format from the leading magic bytes.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut head = [0u8; 4];
    {
        use std::io::Read as _;
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let got = f.read(&mut head).map_err(|e| Error::io(path, e))?;
        if got == 4 && head == FMAT_MAGIC {
            return read_fmat(path);
        }
    }
    read_csv_matrix(path)
}

/// Writes a vector as a single-column FMAT matrix.
pub fn write_fmat_vec(path: &Path, v: &ArrayView1<f64>) -> Result<()> {
    let col = v
        .to_owned()
        .into_shape((v.len(), 1))
        .expect("vector reshapes to one column");
    write_fmat(path, &col.view())
}

/// Reads a single-column FMAT matrix as a vector.
pub fn read_fmat_vec(path: &Path) -> Result<Array1<f64>> {
    let m = read_fmat(path)?;
    if m.ncols() != 1 {
        return Err(Error::dim(
            format!("FMAT vector {}", path.display()),
            "1 column",
            format!("{} columns", m.ncols()),
        ));
    }
    Ok(m.column(0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use tempfile::tempdir;

    fn bits(m: &Array2<f64>) -> Vec<u64> {
        m.t().iter().map(|v| v.to_bits()).collect()
    }

    fn sample_matrix() -> Array2<f64> {
        arr2(&[
            [1.0, -0.0, 1e-300],
            [std::f64::consts::PI, -7.25e18, 4.0 / 3.0],
        ])
    }

    #[test]
    fn fmat_round_trip_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.fmat");
        let m = sample_matrix();
        write_fmat(&path, &m.view()).unwrap();
        let back = read_fmat(&path).unwrap();
        assert_eq!(back.dim(), m.dim());
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn csv_round_trip_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = sample_matrix();
        write_csv_matrix(&path, &m.view()).unwrap();
        let back = read_csv_matrix(&path).unwrap();
        assert_eq!(back.dim(), m.dim());
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn read_matrix_sniffs_format() {
        let dir = tempdir().unwrap();
        let m = sample_matrix();
        let fmat = dir.path().join("m.bin");
        let csv = dir.path().join("m.txt");
        write_fmat(&fmat, &m.view()).unwrap();
        write_csv_matrix(&csv, &m.view()).unwrap();
        assert_eq!(bits(&read_matrix(&fmat).unwrap()), bits(&m));
        assert_eq!(bits(&read_matrix(&csv).unwrap()), bits(&m));
    }

    #[test]
    fn fmat_rejects_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.fmat");
        std::fs::write(&path, b"XMAT\x01\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        match read_fmat(&path) {
            Err(Error::MalformedHeader { reason, .. }) => assert!(reason.contains("magic")),
            other => panic!("expected MalformedHeader, got {other:?}"),
        }
    }

    #[test]
    fn fmat_rejects_bad_version() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.fmat");
        std::fs::write(&path, b"FMAT\x02\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        match read_fmat(&path) {
            Err(Error::MalformedHeader { reason, .. }) => assert!(reason.contains("version")),
            other => panic!("expected MalformedHeader, got {other:?}"),
        }
    }

    #[test]
    fn fmat_rejects_truncated_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.fmat");
        let m = sample_matrix();
        write_fmat(&path, &m.view()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_fmat(&path),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn fmat_reports_nan_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.fmat");
        // 3x2 matrix with NaN at matrix position (1, 0)
        let mut m = Array2::<f64>::zeros((3, 2));
        m[[1, 0]] = 1.0;
        write_fmat(&path, &m.view()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let offset = HEADER_LEN + 8; // column 0, row 1
        bytes[offset..offset + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match read_fmat(&path) {
            Err(Error::NonFinite { row: 1, col: 0, .. }) => {}
            other => panic!("expected NonFinite at (1,0), got {other:?}"),
        }
    }

    #[test]
    fn csv_reports_nan_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "3,2\n0,NaN,0\n0,0,0\n").unwrap();
        match read_csv_matrix(&path) {
            Err(Error::NonFinite { row: 1, col: 0, .. }) => {}
            other => panic!("expected NonFinite at (1,0), got {other:?}"),
        }
    }

    #[test]
    fn csv_reports_parse_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "2,2\n1,2\n1,oops\n").unwrap();
        match read_csv_matrix(&path) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("expected Parse at line 3, got {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_wrong_field_count() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "2,2\n1,2,3\n1,2\n").unwrap();
        assert!(matches!(
            read_csv_matrix(&path),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn csv_rejects_missing_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "2,3\n1,2\n").unwrap();
        assert!(matches!(
            read_csv_matrix(&path),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn vector_round_trip_and_shape_check() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("v.fmat");
        let v = ndarray::arr1(&[1.5, -2.0, 0.0]);
        write_fmat_vec(&path, &v.view()).unwrap();
        let back = read_fmat_vec(&path).unwrap();
        assert_eq!(back, v);

        let wide = dir.path().join("wide.fmat");
        write_fmat(&wide, &sample_matrix().view()).unwrap();
        assert!(matches!(
            read_fmat_vec(&wide),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn write_rejects_non_finite() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.fmat");
        let mut m = Array2::<f64>::zeros((2, 2));
        m[[0, 1]] = f64::INFINITY;
        assert!(matches!(
            write_fmat(&path, &m.view()),
            Err(Error::NonFinite { row: 0, col: 1, .. })
        ));
    }
}

//! Binary data container for Y, X and (optionally) ground truth.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//!      0     8  magic "NFMIMO\0\x01"
//!      8     4  u32 dtype, 1 = complex128 stored as interleaved (re, im) f64
//!     12     4  u32 reserved, 0
//!     16     8  u64 M (receive antennas)
//!     24     8  u64 N (transmit antennas)
//!     32     8  u64 L (snapshots)
//!     40     8  u64 K (truth targets, 0 if absent)
//!     48        Y, M×L complex, column-major
//!               X, N×L complex, column-major
//!               K records of 5 f64: x, y, z, Re b, Im b
//! ```
//!
//! An optional JSON sidecar (`<file>.json`) carries the generating config.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nearfield_core::{CMatrix, Error, Point, Result, C64};

pub const MAGIC: [u8; 8] = *b"NFMIMO\0\x01";
pub const DTYPE_COMPLEX128: u32 = 1;
const HEADER_LEN: usize = 48;

#[derive(Clone, Debug, PartialEq)]
pub struct TruthTarget {
    pub position: Point,
    pub reflection: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    pub y: CMatrix,
    pub x: CMatrix,
    pub truth: Vec<TruthTarget>,
}

impl DataFile {
    pub fn new(y: CMatrix, x: CMatrix, truth: Vec<TruthTarget>) -> Result<Self> {
        if y.ncols() != x.ncols() {
            return Err(Error::DimensionMismatch(format!("Y has {} snapshots, X has {}", y.ncols(), x.ncols())));
        }
        Ok(Self { y, x, truth })
    }

    /// (M, N, L, K)
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.y.nrows(), self.x.nrows(), self.y.ncols(), self.truth.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (m, n, l, k) = self.dims();
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * (m + n) * l + 40 * k);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&DTYPE_COMPLEX128.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for d in [m, n, l, k] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        // nalgebra storage is column-major already
        for z in self.y.iter().chain(self.x.iter()) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        for t in &self.truth {
            for v in [t.position.x, t.position.y, t.position.z, t.reflection.re, t.reflection.im] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN || b[..8] != MAGIC {
            return Err(Error::Format("not a data container (bad magic)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        if u32_at(8) != DTYPE_COMPLEX128 {
            return Err(Error::Format(format!("unsupported dtype {}", u32_at(8))));
        }
        let dims: Vec<usize> = (0..4).map(|i| u64_at(16 + 8 * i) as usize).collect();
        let (m, n, l, k) = (dims[0], dims[1], dims[2], dims[3]);
        let want = (m.checked_add(n))
            .and_then(|s| s.checked_mul(l))
            .and_then(|s| s.checked_mul(16))
            .and_then(|s| s.checked_add(40 * k + HEADER_LEN));
        if want != Some(b.len()) {
            return Err(Error::Format(format!("size {} does not match header (M={m}, N={n}, L={l}, K={k})", b.len())));
        }
        let mut pos = HEADER_LEN;
        let mut f = || {
            let v = f64::from_le_bytes(b[pos..pos + 8].try_into().unwrap());
            pos += 8;
            v
        };
        let mut cplx = |rows: usize| CMatrix::from_iterator(rows, l, (0..rows * l).map(|_| C64::new(f(), f())));
        let y = cplx(m);
        let x = cplx(n);
        let truth = (0..k)
            .map(|_| TruthTarget { position: Point::new(f(), f(), f()), reflection: C64::new(f(), f()) })
            .collect();
        Self::new(y, x, truth)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DataFile {
        let y = CMatrix::from_fn(3, 4, |i, j| C64::new(i as f64 + 0.5, -(j as f64)));
        let x = CMatrix::from_fn(2, 4, |i, j| C64::new((i * j) as f64, 1e-300));
        let t = vec![TruthTarget { position: Point::new(1.0, -2.0, 3.5), reflection: C64::new(0.5, -0.25) }];
        DataFile::new(y, x, t).unwrap()
    }

    #[test]
    fn round_trip_and_layout() {
        let d = sample();
        let b = d.to_bytes();
        assert_eq!(b.len(), 48 + 16 * 5 * 4 + 40);
        assert_eq!(&b[..8], &MAGIC);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        // Y(1,0) is the second complex value
        assert_eq!(f64::from_le_bytes(b[64..72].try_into().unwrap()), 1.5);
        assert_eq!(DataFile::from_bytes(&b).unwrap(), d);
        assert_eq!(d.dims(), (3, 2, 4, 1));
    }

    #[test]
    fn rejects_corruption() {
        let b = sample().to_bytes();
        assert!(DataFile::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(DataFile::from_bytes(&bad).is_err());
        let mut bad = b;
        bad[8] = 2;
        assert!(matches!(DataFile::from_bytes(&bad), Err(Error::Format(_))));
    }
}

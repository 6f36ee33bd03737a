//! Matrix Market coordinate export, for checking operators with external
//! tools. The connection Laplacian is written as `complex hermitian` (lower
//! triangle only), the mass matrix as `real symmetric` diagonal.

use std::fmt::Write as _;
use std::path::Path;

use vhn_core::ops::{ConnectionLaplacian, MassMatrix};

use crate::binfmt::write_atomic;
use crate::error::Result;

pub fn laplacian_to_string(l: &ConnectionLaplacian) -> String {
    let a = &l.matrix;
    let mut entries = Vec::new();
    for r in 0..a.rows() {
        for (c, z) in a.row(r) {
            if c <= r {
                entries.push((r, c, z));
            }
        }
    }
    let mut s = String::from("%%MatrixMarket matrix coordinate complex hermitian\n");
    let _ = writeln!(s, "{} {} {}", a.rows(), a.cols(), entries.len());
    for (r, c, z) in entries {
        let _ = writeln!(s, "{} {} {:.16e} {:.16e}", r + 1, c + 1, z.re, z.im);
    }
    s
}

pub fn mass_to_string(m: &MassMatrix) -> String {
    let n = m.len();
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{n} {n} {n}");
    for (i, d) in m.diag.iter().enumerate() {
        let _ = writeln!(s, "{} {} {:.16e}", i + 1, i + 1, d);
    }
    s
}

pub fn export_operators(l: &ConnectionLaplacian, m: &MassMatrix, laplacian_path: &Path, mass_path: &Path) -> Result<()> {
    write_atomic(laplacian_path, laplacian_to_string(l).as_bytes())?;
    write_atomic(mass_path, mass_to_string(m).as_bytes())
}

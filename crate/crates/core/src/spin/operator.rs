use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest dimension stored and exponentiated densely.
pub const DENSE_DIM_LIMIT: usize = 1024;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Compressed sparse row matrix over complex numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != ZERO {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { dim, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate over stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix),
}

/// Square complex operator on a finite Hilbert space.
///
/// Hamiltonians are stored in linear frequency units (MHz); the `2π` needed to
/// turn them into phases is applied only by the evolution routines.
#[derive(Clone, Debug)]
pub struct Operator {
    repr: Repr,
}

impl Operator {
    pub fn from_dense(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        Operator { repr: Repr::Dense(m) }
    }

    pub fn from_sparse(m: CsrMatrix) -> Self {
        Operator { repr: Repr::Sparse(m) }
    }

    /// Build from triplets, choosing a dense representation up to
    /// [`DENSE_DIM_LIMIT`] and CSR above.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let csr = CsrMatrix::from_triplets(dim, triplets);
        if dim <= DENSE_DIM_LIMIT {
            Operator::from_dense(csr.to_dense())
        } else {
            Operator::from_sparse(csr)
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Operator::from_triplets(dim, std::iter::empty())
    }

    pub fn identity(dim: usize) -> Self {
        Operator::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Operator::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &d)| (i, i, C64::new(d, 0.0))))
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.nrows(),
            Repr::Sparse(s) => s.dim(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, Repr::Sparse(_))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Sparse(s) => s.to_dense(),
        }
    }

    pub fn as_dense(&self) -> Option<&DMatrix<C64>> {
        match &self.repr {
            Repr::Dense(m) => Some(m),
            Repr::Sparse(_) => None,
        }
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        match &self.repr {
            Repr::Dense(m) => {
                let n = m.nrows();
                let mut out = Vec::new();
                for r in 0..n {
                    for c in 0..n {
                        let v = m[(r, c)];
                        if v != ZERO {
                            out.push((r, c, v));
                        }
                    }
                }
                out
            }
            Repr::Sparse(s) => s.iter().collect(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match &self.repr {
            Repr::Dense(_) => CsrMatrix::from_triplets(self.dim(), self.entries()),
            Repr::Sparse(s) => s.clone(),
        }
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        match &self.repr {
            Repr::Dense(m) => {
                let n = m.nrows();
                for (r, out) in y.iter_mut().enumerate().take(n) {
                    let mut acc = ZERO;
                    for (c, xv) in x.iter().enumerate() {
                        acc += m[(r, c)] * xv;
                    }
                    *out = acc;
                }
            }
            Repr::Sparse(s) => s.matvec_into(x, y),
        }
    }

    pub fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        match &self.repr {
            Repr::Dense(m) => m * x,
            Repr::Sparse(s) => {
                let mut y = DVector::zeros(s.dim());
                s.matvec_into(x.as_slice(), y.as_mut_slice());
                y
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.repr {
            Repr::Dense(m) => m.norm(),
            Repr::Sparse(s) => s.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(),
        }
    }

    pub fn adjoint(&self) -> Operator {
        match &self.repr {
            Repr::Dense(m) => Operator::from_dense(m.adjoint()),
            Repr::Sparse(s) => Operator::from_sparse(CsrMatrix::from_triplets(
                s.dim(),
                s.iter().map(|(r, c, v)| (c, r, v.conj())),
            )),
        }
    }

    /// ‖A − A†‖_F / ‖A‖_F (zero for the zero operator).
    pub fn hermiticity_error(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let diff = match &self.repr {
            Repr::Dense(m) => (m - m.adjoint()).norm(),
            Repr::Sparse(s) => {
                let mut acc = 0.0;
                let lookup: BTreeMap<(usize, usize), C64> = s.iter().map(|(r, c, v)| ((r, c), v)).collect();
                for (&(r, c), &v) in &lookup {
                    let mirror = lookup.get(&(c, r)).copied().unwrap_or(ZERO);
                    acc += (v - mirror.conj()).norm_sqr();
                }
                acc.sqrt()
            }
        };
        diff / norm
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Fail with [`Error::NonHermitian`] above `tol`.
    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let err = self.hermiticity_error();
        if err > tol {
            Err(Error::NonHermitian(err))
        } else {
            Ok(())
        }
    }

    fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same_dim(other)?;
        Ok(match (&self.repr, &other.repr) {
            (Repr::Dense(a), Repr::Dense(b)) => Operator::from_dense(a + b),
            _ => Operator::from_triplets(self.dim(), self.entries().into_iter().chain(other.entries())),
        })
    }

    pub fn scale(&self, factor: C64) -> Operator {
        match &self.repr {
            Repr::Dense(m) => Operator::from_dense(m * factor),
            Repr::Sparse(s) => Operator::from_sparse(CsrMatrix {
                values: s.values.iter().map(|v| v * factor).collect(),
                ..s.clone()
            }),
        }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.check_same_dim(other)?;
        Ok(match (&self.repr, &other.repr) {
            (Repr::Dense(a), Repr::Dense(b)) => Operator::from_dense(a * b),
            _ => {
                let a = self.to_csr();
                let b = other.to_csr();
                let mut trip = Vec::new();
                for (r, k, va) in a.iter() {
                    for idx in b.indptr[k]..b.indptr[k + 1] {
                        trip.push((r, b.indices[idx], va * b.values[idx]));
                    }
                }
                Operator::from_triplets(self.dim(), trip)
            }
        })
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.add(&ba.scale(C64::new(-1.0, 0.0)))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Operator) -> Operator {
        let (da, db) = (self.dim(), other.dim());
        let b_entries = other.entries();
        let trip: Vec<_> = self
            .entries()
            .into_iter()
            .flat_map(|(ra, ca, va)| {
                b_entries.iter().map(move |&(rb, cb, vb)| (ra * db + rb, ca * db + cb, va * vb))
            })
            .collect();
        Operator::from_triplets(da * db, trip)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries().iter().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }
}

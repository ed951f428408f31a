//! Quadratic-monomial basis over the error vector and the linear-in-weights
//! value approximator `V(E) = Wᵀφ(E)`.
//!
//! Term ordering is canonical so stored weight files are portable: all cross
//! products `x_i x_j` (i < j) sorted by anti-diagonal `(i + j, i)`, followed
//! by the squares `x_i²` in index order. For n = 6 this yields
//! `x1x2, x1x3, x1x4, x2x3, x1x5, x2x4, x1x6, x2x5, x3x4, x2x6, x3x5, x3x6,
//! x4x5, x4x6, x5x6, x1², …, x6²` (21 terms).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Version tag written into weight files; bump when the term layout changes.
pub const TERM_ORDERING_VERSION: &str = "quadratic-v1";

const WEIGHT_FILE_MAGIC: &str = "adptrack-weights v1";

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("dimension mismatch: basis expects {expected}-vectors, got length {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("weight vector has {actual} entries but the basis has {expected} terms")]
    WeightCount { expected: usize, actual: usize },
    #[error("weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pure quadratic monomial basis; `φ(0) = 0` structurally, so `V(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticBasis {
    dim: usize,
    terms: Vec<(usize, usize)>,
    scale: DVector<f64>,
}

impl QuadraticBasis {
    pub fn new(dim: usize) -> Self {
        Self::scaled(dim, DVector::repeat(dim, 1.0))
    }

    /// Basis over the diagonally scaled error `z = scale ∘ E`. Unit scale is
    /// the default; scaling is an opt-in conditioning aid for training.
    pub fn scaled(dim: usize, scale: DVector<f64>) -> Self {
        assert!(dim > 0, "basis dimension must be positive");
        assert_eq!(scale.len(), dim, "scale length must match dimension");
        assert!(scale.iter().all(|&s| s > 0.0), "scale entries must be positive");
        let mut cross: Vec<(usize, usize)> = (0..dim)
            .flat_map(|i| ((i + 1)..dim).map(move |j| (i, j)))
            .collect();
        cross.sort_by_key(|&(i, j)| (i + j, i));
        let mut terms = cross;
        terms.extend((0..dim).map(|i| (i, i)));
        Self { dim, terms, scale }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of terms, `n(n+1)/2`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(usize, usize)] {
        &self.terms
    }

    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }

    pub fn has_unit_scale(&self) -> bool {
        self.scale.iter().all(|&s| s == 1.0)
    }

    fn check_dim(&self, e: &DVector<f64>) -> Result<(), BasisError> {
        if e.len() != self.dim {
            return Err(BasisError::DimensionMismatch {
                expected: self.dim,
                actual: e.len(),
            });
        }
        Ok(())
    }

    /// Feature vector `φ(E)` in the fixed term ordering.
    pub fn eval(&self, e: &DVector<f64>) -> Result<DVector<f64>, BasisError> {
        self.check_dim(e)?;
        let mut phi = DVector::zeros(self.terms.len());
        for (k, &(i, j)) in self.terms.iter().enumerate() {
            phi[k] = (self.scale[i] * e[i]) * (self.scale[j] * e[j]);
        }
        Ok(phi)
    }

    /// Gradient `∂φ/∂E`, shape (terms × n). Row for `x_i x_j` has `∂/∂E_i`
    /// and `∂/∂E_j` entries; squares give `2 s_i² E_i`.
    pub fn eval_gradient(&self, e: &DVector<f64>) -> Result<DMatrix<f64>, BasisError> {
        self.check_dim(e)?;
        let mut grad = DMatrix::zeros(self.terms.len(), self.dim);
        for (k, &(i, j)) in self.terms.iter().enumerate() {
            if i == j {
                grad[(k, i)] = 2.0 * self.scale[i] * self.scale[i] * e[i];
            } else {
                grad[(k, i)] = self.scale[i] * self.scale[j] * e[j];
                grad[(k, j)] = self.scale[i] * self.scale[j] * e[i];
            }
        }
        Ok(grad)
    }
}

/// Value approximator `V(E) = Wᵀφ(E)` over a [`QuadraticBasis`].
///
/// Positivity of `V` away from the origin is a post-training check, not a
/// structural property of the type.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    basis: QuadraticBasis,
    weights: DVector<f64>,
}

impl ValueFunction {
    pub fn new(basis: QuadraticBasis, weights: DVector<f64>) -> Result<Self, BasisError> {
        if weights.len() != basis.len() {
            return Err(BasisError::WeightCount {
                expected: basis.len(),
                actual: weights.len(),
            });
        }
        Ok(Self { basis, weights })
    }

    pub fn zero(basis: QuadraticBasis) -> Self {
        let weights = DVector::zeros(basis.len());
        Self { basis, weights }
    }

    pub fn basis(&self) -> &QuadraticBasis {
        &self.basis
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `V(E) = Wᵀφ(E)`; zero at the origin for any weights.
    pub fn value(&self, e: &DVector<f64>) -> Result<f64, BasisError> {
        Ok(self.weights.dot(&self.basis.eval(e)?))
    }

    /// `∇V(E) = (∂φ/∂E)ᵀ W`, length n.
    pub fn gradient(&self, e: &DVector<f64>) -> Result<DVector<f64>, BasisError> {
        Ok(self.basis.eval_gradient(e)?.transpose() * &self.weights)
    }

    /// Symmetric matrix `P` with `V(E) = EᵀPE`.
    pub fn quadratic_form(&self) -> DMatrix<f64> {
        let n = self.basis.dim();
        let s = self.basis.scale();
        let mut p = DMatrix::zeros(n, n);
        for (k, &(i, j)) in self.basis.terms().iter().enumerate() {
            let w = self.weights[k] * s[i] * s[j];
            if i == j {
                p[(i, i)] += w;
            } else {
                p[(i, j)] += 0.5 * w;
                p[(j, i)] += 0.5 * w;
            }
        }
        p
    }

    /// Plain-text serialization: header naming `n`, term count and ordering
    /// version, optional scale, then one weight per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{WEIGHT_FILE_MAGIC}").unwrap();
        writeln!(out, "n {}", self.basis.dim()).unwrap();
        writeln!(out, "terms {}", self.basis.len()).unwrap();
        writeln!(out, "ordering {TERM_ORDERING_VERSION}").unwrap();
        if !self.basis.has_unit_scale() {
            let parts: Vec<String> = self.basis.scale().iter().map(|s| format!("{s:.17e}")).collect();
            writeln!(out, "scale {}", parts.join(" ")).unwrap();
        }
        for w in self.weights.iter() {
            writeln!(out, "{w:.17e}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BasisError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let magic = lines.next().ok_or_else(|| BasisError::Format("empty file".into()))?;
        if magic != WEIGHT_FILE_MAGIC {
            return Err(BasisError::Format(format!("unrecognized header `{magic}`")));
        }
        let mut n: Option<usize> = None;
        let mut terms: Option<usize> = None;
        let mut ordering: Option<String> = None;
        let mut scale: Option<Vec<f64>> = None;
        let mut weights: Vec<f64> = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            match head {
                "n" => n = Some(parse_field(parts.next(), "n")?),
                "terms" => terms = Some(parse_field(parts.next(), "terms")?),
                "ordering" => ordering = parts.next().map(str::to_owned),
                "scale" => {
                    let vals: Result<Vec<f64>, _> = line
                        .split_whitespace()
                        .skip(1)
                        .map(|v| v.parse::<f64>())
                        .collect();
                    scale = Some(vals.map_err(|e| BasisError::Format(format!("bad scale: {e}")))?);
                }
                _ => {
                    let w: f64 = head
                        .parse()
                        .map_err(|e| BasisError::Format(format!("bad weight `{head}`: {e}")))?;
                    weights.push(w);
                }
            }
        }
        let n = n.ok_or_else(|| BasisError::Format("missing `n` header".into()))?;
        let ordering = ordering.ok_or_else(|| BasisError::Format("missing `ordering` header".into()))?;
        if ordering != TERM_ORDERING_VERSION {
            return Err(BasisError::Format(format!(
                "unsupported term ordering `{ordering}` (expected {TERM_ORDERING_VERSION})"
            )));
        }
        let basis = match scale {
            Some(s) => {
                if s.len() != n {
                    return Err(BasisError::Format("scale length differs from n".into()));
                }
                QuadraticBasis::scaled(n, DVector::from_vec(s))
            }
            None => QuadraticBasis::new(n),
        };
        if let Some(t) = terms {
            if t != basis.len() {
                return Err(BasisError::Format(format!(
                    "term count {t} inconsistent with n = {n}"
                )));
            }
        }
        if weights.len() != basis.len() {
            return Err(BasisError::Format(format!(
                "expected {} weights, found {}",
                basis.len(),
                weights.len()
            )));
        }
        Self::new(basis, DVector::from_vec(weights))
    }

    pub fn save(&self, path: &Path) -> Result<(), BasisError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BasisError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

fn parse_field(value: Option<&str>, name: &str) -> Result<usize, BasisError> {
    value
        .ok_or_else(|| BasisError::Format(format!("missing value for `{name}`")))?
        .parse()
        .map_err(|e| BasisError::Format(format!("bad `{name}`: {e}")))
}

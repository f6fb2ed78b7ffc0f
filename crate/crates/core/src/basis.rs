//! Monomial feature basis `λ(q)` and its Jacobian.
//!
//! Terms run over total degrees `1..=degree` (no constant term). Within a
//! degree, exponent vectors appear in descending lexicographic order, so for
//! two variables and degree 2 the order is `q0, q1, q0², q0 q1, q1²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("basis needs n_q >= 1 and degree >= 1 (got n_q = {n_q}, degree = {degree})")]
    Empty { n_q: usize, degree: u32 },
    #[error("input has {got} entries, basis expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("serialized term list does not match the canonical order")]
    TermOrder,
}

/// Number of monomials of total degree exactly `d` in `n` variables.
pub fn terms_of_degree(n: usize, d: u32) -> usize {
    // C(n + d - 1, d), evaluated incrementally to stay exact
    let mut c: u128 = 1;
    for k in 1..=d as u128 {
        c = c * (n as u128 + k - 1) / k;
    }
    c as usize
}

/// Number of non-constant monomials with total degree at most `degree`.
pub fn basis_size(n: usize, degree: u32) -> usize {
    (1..=degree).map(|d| terms_of_degree(n, d)).sum()
}

/// Sparse monomial: `(variable, power)` pairs with ascending variable index.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Term {
    factors: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    n_q: usize,
    degree: u32,
    terms: Vec<Term>,
}

/// Serialized basis: dimensions plus the explicit exponent vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub n_q: usize,
    pub degree: u32,
    pub order: String,
    pub terms: Vec<Vec<u32>>,
}

pub const TERM_ORDER: &str = "graded-lex-descending";

fn push_exponents(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == n {
        prefix.push(remaining);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=remaining).rev() {
        prefix.push(e);
        push_exponents(n, remaining - e, prefix, out);
        prefix.pop();
    }
}

impl MonomialBasis {
    pub fn new(n_q: usize, degree: u32) -> Result<Self, BasisError> {
        if n_q == 0 || degree == 0 {
            return Err(BasisError::Empty { n_q, degree });
        }
        let mut terms = Vec::with_capacity(basis_size(n_q, degree));
        let mut exps = Vec::new();
        for d in 1..=degree {
            exps.clear();
            push_exponents(n_q, d, &mut Vec::with_capacity(n_q), &mut exps);
            terms.extend(exps.iter().map(|e| Term {
                factors: e.iter().enumerate().filter(|(_, p)| **p > 0).map(|(i, p)| (i, *p)).collect(),
            }));
        }
        Ok(Self { n_q, degree, terms })
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn exponents(&self, k: usize) -> Vec<u32> {
        let mut e = vec![0; self.n_q];
        for &(i, p) in &self.terms[k].factors {
            e[i] = p;
        }
        e
    }

    fn check(&self, q: &DVector<f64>) -> Result<(), BasisError> {
        if q.len() != self.n_q {
            return Err(BasisError::Dimension { expected: self.n_q, got: q.len() });
        }
        Ok(())
    }

    /// `λ(q)`.
    pub fn eval(&self, q: &DVector<f64>) -> Result<DVector<f64>, BasisError> {
        self.check(q)?;
        Ok(DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|t| t.factors.iter().map(|&(i, p)| q[i].powi(p as i32)).product::<f64>()),
        ))
    }

    /// `J_λ = ∂λ/∂q`, an `n_λ × n_q` matrix.
    pub fn jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, BasisError> {
        self.check(q)?;
        let mut j = DMatrix::zeros(self.terms.len(), self.n_q);
        for (row, t) in self.terms.iter().enumerate() {
            for (k, &(var, pow)) in t.factors.iter().enumerate() {
                let mut d = f64::from(pow) * q[var].powi(pow as i32 - 1);
                for (m, &(i, p)) in t.factors.iter().enumerate() {
                    if m != k {
                        d *= q[i].powi(p as i32);
                    }
                }
                j[(row, var)] = d;
            }
        }
        Ok(j)
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor {
            n_q: self.n_q,
            degree: self.degree,
            order: TERM_ORDER.to_string(),
            terms: (0..self.len()).map(|k| self.exponents(k)).collect(),
        }
    }

    /// Rebuilds from a descriptor, requiring the stored term list to match
    /// the canonical order exactly.
    pub fn from_descriptor(d: &BasisDescriptor) -> Result<Self, BasisError> {
        let b = Self::new(d.n_q, d.degree)?;
        if d.order != TERM_ORDER || d.terms.len() != b.len() || (0..b.len()).any(|k| b.exponents(k) != d.terms[k]) {
            return Err(BasisError::TermOrder);
        }
        Ok(b)
    }
}

/// Convenience wrapper matching the builder naming used elsewhere.
pub fn build_basis(n_q: usize, degree: u32) -> Result<MonomialBasis, BasisError> {
    MonomialBasis::new(n_q, degree)
}

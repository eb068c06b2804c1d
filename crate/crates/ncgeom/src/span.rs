//! Graded spans of generator monomials.

use crate::linalg::{ComplexMatrix, C64, ONE};
use crate::par;
use crate::triple::SpectralTriple;

/// Words of length ≤ `degree` in `ngen` letters. Commutative algebras only
/// need nondecreasing words (multisets).
pub fn words(ngen: usize, degree: usize, commutative: bool) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..degree {
        let mut next = Vec::new();
        for w in &layer {
            let start = if commutative {
                w.last().copied().unwrap_or(0)
            } else {
                0
            };
            for g in start..ngen {
                let mut v = w.clone();
                v.push(g);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// A monomial and its matrix.
#[derive(Clone, Debug)]
pub struct Monomial {
    pub word: Vec<usize>,
    pub matrix: ComplexMatrix,
}

impl Monomial {
    pub fn label(&self, triple: &SpectralTriple) -> String {
        if self.word.is_empty() {
            return "1".into();
        }
        self.word
            .iter()
            .map(|&g| triple.generators()[g].0.as_str())
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// Monomials up to `degree`, with numerically repeated matrices removed.
pub fn monomials(triple: &SpectralTriple, degree: usize) -> Vec<Monomial> {
    let gens = triple.generators();
    let ws = words(gens.len(), degree, triple.is_commutative());
    let mats = par::map_slice(&ws, |w| {
        let mut m = ComplexMatrix::identity(triple.dim());
        for &g in w {
            m = m.matmul(&gens[g].1);
        }
        m
    });
    let mut out: Vec<Monomial> = Vec::new();
    for (w, m) in ws.into_iter().zip(mats) {
        let scale = m.frobenius_norm().max(1.0);
        let dup = out
            .iter()
            .any(|o| (&o.matrix - &m).frobenius_norm() <= 1e-12 * scale);
        if !dup && m.frobenius_norm() > 0.0 {
            out.push(Monomial { word: w, matrix: m });
        }
    }
    out
}

/// Orthonormal basis (over C, Euclidean on sample points) of the span of
/// monomials in the given point functions.
#[derive(Clone, Debug)]
pub struct PointSpan {
    basis: Vec<Vec<C64>>,
}

impl PointSpan {
    /// `generators[g][x]` is the value of generator g at point x.
    pub fn new(generators: &[Vec<C64>], degree: usize) -> Self {
        let npts = generators.first().map_or(0, |g| g.len());
        let mut basis: Vec<Vec<C64>> = Vec::new();
        for w in words(generators.len(), degree, true) {
            if basis.len() >= npts {
                break;
            }
            let mut v = vec![ONE; npts];
            for &g in &w {
                for (vx, gx) in v.iter_mut().zip(&generators[g]) {
                    *vx *= gx;
                }
            }
            let norm0 = l2(&v);
            if norm0 == 0.0 {
                continue;
            }
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let c: C64 = b.iter().zip(&v).map(|(bi, vi)| bi.conj() * vi).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= c * bi;
                    }
                }
            }
            let n = l2(&v);
            if n > 1e-10 * norm0 {
                basis.push(v.iter().map(|z| z / n).collect());
            }
        }
        Self { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Least-squares fit of `values` inside the span.
    pub fn project(&self, values: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); values.len()];
        for b in &self.basis {
            let c: C64 = b.iter().zip(values).map(|(bi, vi)| bi.conj() * vi).sum();
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        out
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_counts() {
        assert_eq!(words(2, 3, false).len(), 15);
        assert_eq!(words(2, 3, true).len(), 10);
    }

    #[test]
    fn span_reproduces_members() {
        let x: Vec<C64> = (0..10).map(|k| C64::new(k as f64 / 10.0, 0.0)).collect();
        let s = PointSpan::new(std::slice::from_ref(&x), 2);
        let target: Vec<C64> = x.iter().map(|v| v * v - 0.5).collect();
        let fit = s.project(&target);
        for (a, b) in fit.iter().zip(&target) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

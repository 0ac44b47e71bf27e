use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PROB_TOL;

/// A law with finitely many atoms, sorted by value with equal values merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl FiniteDistribution {
    /// Builds a law from `(value, probability)` pairs; zero-probability atoms are dropped.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if let Some(&(v, p)) = atoms
            .iter()
            .find(|(v, p)| !v.is_finite() || !p.is_finite() || *p < 0.0)
        {
            return Err(Error::NonFinite(format!("atom ({v}, {p})")));
        }
        atoms.retain(|&(_, p)| p > 0.0);
        if atoms.is_empty() {
            return Err(Error::Malformed("distribution without positive atoms".into()));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Malformed(format!("probabilities sum to {total}")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// Law of `f(Z)`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|&(v, p)| (f(v), p)))
    }

    pub fn shifted(&self, c: f64) -> Self {
        // Adding a constant preserves order; only exact collisions can merge.
        Self::new(self.atoms.iter().map(|&(v, p)| (v + c, p))).expect("shift keeps a valid law")
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of free parameters of the MaGP model with k components and a
/// t-dimensional order mapping (mu, sigma2, theta and the mapping; tau2 excluded).
pub fn param_count(k: usize, t: usize) -> Result<usize> {
    if t < 1 || t + 1 > k {
        return invalid(format!("latent dimension t={t} must lie in 1..={}", k.saturating_sub(1)));
    }
    Ok(1 + 2 * k + k * t - t * (t + 1) / 2)
}

/// Latent coordinates of the k order positions. Row l has nonzero entries
/// only in columns j < l, so row 1 is the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingMatrix {
    k: usize,
    t: usize,
    free: Vec<f64>,
}

impl MappingMatrix {
    pub fn free_count(k: usize, t: usize) -> usize {
        (2..=k).map(|l| (l - 1).min(t)).sum()
    }

    pub fn zeros(k: usize, t: usize) -> Result<Self> {
        param_count(k, t)?;
        Ok(MappingMatrix { k, t, free: vec![0.0; Self::free_count(k, t)] })
    }

    pub fn from_free(k: usize, t: usize, free: Vec<f64>) -> Result<Self> {
        param_count(k, t)?;
        if free.len() != Self::free_count(k, t) {
            return invalid(format!(
                "mapping needs {} free entries, got {}",
                Self::free_count(k, t),
                free.len()
            ));
        }
        if free.iter().any(|v| !v.is_finite()) {
            return invalid("mapping entries must be finite");
        }
        Ok(MappingMatrix { k, t, free })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn free(&self) -> &[f64] {
        &self.free
    }

    /// Position of entry (l, j) in the free vector, 1-based arguments.
    pub fn free_index(&self, l: usize, j: usize) -> Option<usize> {
        if l < 2 || l > self.k || j < 1 || j >= l || j > self.t {
            return None;
        }
        let offset: usize = (2..l).map(|m| (m - 1).min(self.t)).sum();
        Some(offset + j - 1)
    }

    /// (l, j) pairs of the free entries, in storage order.
    pub fn free_entries(&self) -> Vec<(usize, usize)> {
        (2..=self.k).flat_map(|l| (1..=(l - 1).min(self.t)).map(move |j| (l, j))).collect()
    }

    pub fn get(&self, l: usize, j: usize) -> f64 {
        self.free_index(l, j).map_or(0.0, |i| self.free[i])
    }

    pub fn set(&mut self, l: usize, j: usize, v: f64) -> Result<()> {
        match self.free_index(l, j) {
            Some(i) => {
                self.free[i] = v;
                Ok(())
            }
            None => invalid(format!("mapping entry ({l},{j}) is structurally zero")),
        }
    }

    pub fn row(&self, l: usize) -> Vec<f64> {
        (1..=self.t).map(|j| self.get(l, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (1..=self.k).map(|l| self.row(l)).collect()
    }
}

/// Latent coordinates of order position `order` (1-based).
pub fn latent_map(mapping: &MappingMatrix, order: usize) -> Result<Vec<f64>> {
    if order < 1 || order > mapping.k {
        return invalid(format!("order {order} outside 1..={}", mapping.k));
    }
    Ok(mapping.row(order))
}

use alloc::vec::Vec;

use crate::math::{exp, neumaier_sum};
use crate::{Error, Result};

/// Tensor-product quadrature over a box, with node masses proportional to
/// the prior density and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    mass: Vec<f64>,
}

impl QuadratureGrid {
    /// Independent Gaussian prior `N(mean_k, sd_k²)`, truncated to
    /// `mean ± half_width·sd` and discretized with the trapezoid rule on
    /// `points_per_dim` nodes per axis.
    pub fn gaussian_box(mean: &[f64], sd: &[f64], half_width: f64, points_per_dim: usize) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::EmptyInput);
        }
        if mean.len() != sd.len() {
            return Err(Error::LengthMismatch { expected: mean.len(), found: sd.len() });
        }
        if points_per_dim < 2 {
            return Err(Error::InvalidConfig("need at least two nodes per axis".into()));
        }
        if !(half_width.is_finite() && half_width > 0.0) || sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidConfig("quadrature box must have positive finite extent".into()));
        }
        let axes: Vec<Vec<(f64, f64)>> = mean
            .iter()
            .zip(sd)
            .map(|(&m, &s)| {
                let n = points_per_dim;
                let step = 2.0 * half_width / (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        let z = -half_width + step * i as f64;
                        let trap = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                        (m + s * z, trap * exp(-0.5 * z * z))
                    })
                    .collect()
            })
            .collect();
        let dim = mean.len();
        let total = points_per_dim.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total * dim);
        let mut mass = Vec::with_capacity(total);
        let mut idx = alloc::vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                nodes.push(axes[k][i].0);
                w *= axes[k][i].1;
            }
            mass.push(w);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < points_per_dim {
                    break;
                }
                *slot = 0;
            }
        }
        Self::from_nodes(dim, nodes, mass)
    }

    /// Arbitrary nodes (row-major, `dim` values each) and positive masses;
    /// masses are rescaled to sum to one.
    pub fn from_nodes(dim: usize, nodes: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() || dim == 0 {
            return Err(Error::EmptyInput);
        }
        if nodes.len() != dim * mass.len() {
            return Err(Error::LengthMismatch { expected: dim * mass.len(), found: nodes.len() });
        }
        if mass.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidConfig("quadrature masses must be positive".into()));
        }
        let total = neumaier_sum(mass.iter().copied());
        let mass = mass.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, nodes, mass })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn weighted<L: Fn(&[f64]) -> Result<f64>>(&self, weight_fn: &L) -> Result<Vec<f64>> {
        self.nodes()
            .zip(&self.mass)
            .map(|(t, &p)| {
                let l = weight_fn(t)?;
                if !(l.is_finite() && l >= 0.0) {
                    return Err(Error::NonFinite("population weight"));
                }
                Ok(p * l)
            })
            .collect()
    }
}

/// `Z = ∫ p(θ) L(θ) dθ` on the grid.
pub fn normalizer<L: Fn(&[f64]) -> Result<f64>>(grid: &QuadratureGrid, weight_fn: L) -> Result<f64> {
    Ok(neumaier_sum(grid.weighted(&weight_fn)?))
}

/// `∫ h p L / ∫ p L` on the grid.
pub fn phi_functional<L, H>(grid: &QuadratureGrid, weight_fn: L, h: H) -> Result<f64>
where
    L: Fn(&[f64]) -> Result<f64>,
    H: Fn(&[f64]) -> f64,
{
    let pl = grid.weighted(&weight_fn)?;
    let z = neumaier_sum(pl.iter().copied());
    if !(z > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    let mut terms = Vec::with_capacity(pl.len());
    for (index, (t, w)) in grid.nodes().zip(&pl).enumerate() {
        let v = h(t);
        if !v.is_finite() {
            return Err(Error::NonFiniteH { index });
        }
        terms.push(w * v);
    }
    Ok(neumaier_sum(terms) / z)
}

/// `(2 sup|h| / Z_M) · gap`, the bound on `|Φ_M(h) − Φ_∞(h)|` obtained from a
/// uniform bound `gap` on `|L_M − L_∞|`.
pub fn phi_difference_bound(sup_h: f64, z_m: f64, gap: f64) -> Result<f64> {
    if !(z_m > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    Ok(2.0 * sup_h.abs() / z_m * gap)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Interval;

/// Finitely supported probability measure on an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// Validates: atoms strictly increasing and inside `interval`, weights
    /// positive and summing to one within 1e-12.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>, interval: &Interval) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidInput("atomic measure needs matching, nonempty atoms and weights".into()));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("atoms must be strictly increasing".into()));
        }
        if atoms.iter().any(|&t| !interval.contains(t)) {
            return Err(Error::InvalidInput("atom outside the interval".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("atom weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    pub fn dirac(t: f64) -> Self {
        Self {
            atoms: vec![t],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Massive nodes closer than this belong to the same cluster.
    pub merge_radius: f64,
    pub mass_floor: f64,
    pub max_atoms: usize,
    /// A cluster covering more grid nodes than this is a smeared-out
    /// component rather than a discretized atom.
    pub max_cluster_nodes: usize,
}

impl ExtractOptions {
    pub fn for_grid(spacing: f64) -> Self {
        Self {
            merge_radius: 2.0 * spacing,
            mass_floor: 1e-6,
            max_atoms: 12,
            max_cluster_nodes: 8,
        }
    }
}

/// Collapses a grid solution into atoms at the mass-weighted centroids of
/// its clusters.
pub fn extract_atoms(grid: &[f64], weights: &[f64], interval: &Interval, opts: &ExtractOptions) -> Result<AtomicMeasure> {
    assert_eq!(grid.len(), weights.len());
    // (first node, last node, mass, first moment)
    let mut clusters: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (i, (&t, &w)) in grid.iter().zip(weights).enumerate() {
        if w <= opts.mass_floor {
            continue;
        }
        match clusters.last_mut() {
            Some(c) if t - grid[c.1] <= opts.merge_radius * (1.0 + 1e-9) => {
                c.1 = i;
                c.2 += w;
                c.3 += w * t;
            }
            _ => clusters.push((i, i, w, w * t)),
        }
    }
    if clusters.is_empty() {
        return Err(Error::InvalidInput("no grid node carries mass above the floor".into()));
    }
    if clusters.len() > opts.max_atoms {
        return Err(Error::Degenerate(format!(
            "{} mass clusters exceed the atom limit {}",
            clusters.len(),
            opts.max_atoms
        )));
    }
    if let Some(c) = clusters.iter().find(|c| c.1 - c.0 + 1 > opts.max_cluster_nodes) {
        return Err(Error::Degenerate(format!(
            "mass spread over {} contiguous grid nodes on [{}, {}]",
            c.1 - c.0 + 1,
            grid[c.0],
            grid[c.1]
        )));
    }
    let total: f64 = clusters.iter().map(|c| c.2).sum();
    let atoms: Vec<f64> = clusters
        .iter()
        .map(|c| (c.3 / c.2).clamp(interval.a, interval.b))
        .collect();
    let mut weights: Vec<f64> = clusters.iter().map(|c| c.2 / total).collect();
    // exact renormalization
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    AtomicMeasure::new(atoms, weights, interval)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn endpoint_spikes() {
        let grid = unit().uniform_grid(11);
        let mut w = vec![0.0; 11];
        w[0] = 0.5;
        w[10] = 0.5;
        let m = extract_atoms(&grid, &w, &unit(), &ExtractOptions::for_grid(0.1)).unwrap();
        assert_eq!(m.atoms(), &[0.0, 1.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn split_spike_merges_to_centroid() {
        let grid = unit().uniform_grid(11);
        let mut w = vec![0.0; 11];
        w[4] = 0.25;
        w[5] = 0.75;
        let m = extract_atoms(&grid, &w, &unit(), &ExtractOptions::for_grid(0.1)).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.atoms()[0] - 0.475).abs() < 1e-15);
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn single_interior_spike() {
        let iv = Interval::new(-0.5, 0.5).unwrap();
        let grid = iv.uniform_grid(11);
        let mut w = vec![0.0; 11];
        w[5] = 1.0;
        let m = extract_atoms(&grid, &w, &iv, &ExtractOptions::for_grid(0.1)).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert!(m.atoms()[0].abs() < 1e-15);
    }

    #[test]
    fn flat_weights_signal_degeneracy() {
        let grid = unit().uniform_grid(101);
        let w = vec![1.0 / 101.0; 101];
        let r = extract_atoms(&grid, &w, &unit(), &ExtractOptions::for_grid(0.01));
        assert!(matches!(r, Err(Error::Degenerate(_))));
        // scattered mass on many separated nodes
        let mut w = vec![0.0; 101];
        for i in (0..101).step_by(5) {
            w[i] = 1.0 / 21.0;
        }
        let r = extract_atoms(&grid, &w, &unit(), &ExtractOptions::for_grid(0.01));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn measure_validation() {
        let iv = unit();
        assert!(AtomicMeasure::new(vec![0.5, 0.2], vec![0.5, 0.5], &iv).is_err());
        assert!(AtomicMeasure::new(vec![0.2, 1.5], vec![0.5, 0.5], &iv).is_err());
        assert!(AtomicMeasure::new(vec![0.2, 0.5], vec![0.6, 0.5], &iv).is_err());
        assert!(AtomicMeasure::new(vec![0.2, 0.5], vec![1.0, 0.0], &iv).is_err());
        assert!(AtomicMeasure::new(vec![0.2, 0.5], vec![0.3, 0.7], &iv).is_ok());
    }
}

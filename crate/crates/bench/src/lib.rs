//! Fixtures shared by the benchmarks in `benches/`.

use cotdre_core::{Bounds, DiscreteMeasure, PathBatch, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `atoms` uniform random paths in `[-1, 1]` with random positive weights.
pub fn random_measure(atoms: usize, steps: usize, seed: u64) -> DiscreteMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::new(steps, 1).expect("positive steps");
    let bounds = Bounds::new(-1.0, 1.0).expect("valid bounds");
    let data = (0..atoms * steps).map(|_| rng.random_range(-1.0..1.0)).collect();
    let masses = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasure::from_masses(PathBatch::new(shape, bounds, data).expect("in bounds"), masses)
        .expect("positive masses")
}

/// Same, with values restricted to `{-1, 0, 1}` so that prefixes repeat.
pub fn lattice_measure(atoms: usize, steps: usize, seed: u64) -> DiscreteMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::new(steps, 1).expect("positive steps");
    let bounds = Bounds::new(-1.0, 1.0).expect("valid bounds");
    let data = (0..atoms * steps).map(|_| rng.random_range(-1..=1) as f64).collect();
    DiscreteMeasure::uniform(PathBatch::new(shape, bounds, data).expect("in bounds"))
}

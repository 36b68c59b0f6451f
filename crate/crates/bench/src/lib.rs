//! Fixed workloads shared by the benchmarks in `benches/`.

use spinflow_core::ModelParams;

/// Antiferromagnetic chain at the coupling used throughout the test suite.
pub fn antiferro(n_sites: usize, t: f64) -> ModelParams {
    ModelParams::new(n_sites, 3, -1.0, 0.2, t)
}

/// Ferromagnetic chain at the coupling used throughout the test suite.
pub fn ferro(n_sites: usize, t: f64) -> ModelParams {
    ModelParams::new(n_sites, 3, 1.0, 0.4, t)
}

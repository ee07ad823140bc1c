//! Fixtures shared by the benchmarks.

use servnet::instancegen::{generate_suite, GeneratorConfig};
use servnet::Instance;

/// Default-configuration instance on network `index` (0, 1, 2 for 50, 100,
/// 150 service-arcs) with full disruption.
pub fn default_instance(index: usize, n_clients: usize) -> Instance {
    let cfg = GeneratorConfig::default();
    let suite = generate_suite(&cfg).expect("default config generates");
    suite.instance(index, n_clients, 1.0, 1.0, &cfg)
}

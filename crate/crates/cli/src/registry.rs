//! Built-in scenarios, one configuration file per worked example.

pub struct Entry {
    pub name: &'static str,
    /// Name with its parameters, as listed.
    pub label: &'static str,
    pub summary: &'static str,
    pub source: &'static str,
}

macro_rules! entry {
    ($name:literal, $label:literal, $summary:literal) => {
        Entry {
            name: $name,
            label: $label,
            summary: $summary,
            source: include_str!(concat!("../scenarios/", $name, ".toml")),
        }
    };
}

pub const REGISTRY: [Entry; 12] = [
    entry!("swap-dichotomy", "swap-dichotomy", "two-state swap: continuous time converges, discrete time oscillates"),
    entry!("heat-nonconvergence", "heat-nonconvergence", "heat orbit of an annuli indicator oscillates at the origin"),
    entry!("arctan-two-dim-kernel", "arctan-two-dim-kernel", "1 and arctan span the kernel; convergence not predicted"),
    entry!("cubic-drift-decay", "cubic-drift-decay", "drift x^2: trivial kernel, orbits decay"),
    entry!("halfline-drift", "halfline-drift(b)", "half-line with drift b in {+1, 0, -1}: survival limit or decay"),
    entry!("radial-exterior", "radial-exterior(d,r)", "exterior of a ball: escape in d = 3, decay in d = 1"),
    entry!("ou-doob", "ou-doob", "Ornstein-Uhlenbeck: Gaussian fixed measure, rank-one limit"),
    entry!("ou-exterior-dirichlet", "ou-exterior-dirichlet", "Ornstein-Uhlenbeck drift killed at x = 1: decay"),
    entry!("coupled-irreducible", "coupled-irreducible", "two exchanging copies: dim F = 1, factorized invariant measure"),
    entry!("coupled-reducible", "coupled-reducible", "uncoupled and partially coupled systems: dim F = rank = 2"),
    entry!("two-block-doob", "two-block-doob", "two closed classes: convergence with a rank-two limit"),
    entry!("matrix-lemmas", "matrix-lemmas", "fixed spaces of e^{tA} and its adjoint; bounded non-contractive coupling"),
];

/// Entries whose name contains `filter`.
pub fn list(filter: Option<&str>) -> Vec<&'static Entry> {
    REGISTRY.iter().filter(|e| filter.is_none_or(|f| e.name.contains(f))).collect()
}

pub fn find(name: &str) -> Option<&'static Entry> {
    REGISTRY.iter().find(|e| e.name == name || e.label == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use std::path::Path;

    #[test]
    fn every_entry_parses() {
        for e in &REGISTRY {
            parse_config(e.source, e.name, Path::new(".")).unwrap_or_else(|err| panic!("{err}"));
        }
    }

    #[test]
    fn filters_by_substring() {
        assert_eq!(list(None).len(), 12);
        assert_eq!(list(Some("coupled")).len(), 2);
        assert!(list(Some("no-such-scenario")).is_empty());
    }
}

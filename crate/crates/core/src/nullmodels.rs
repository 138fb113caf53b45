//! Randomized surrogate networks: the three flow-randomization schemes and a
//! deterministic multi-realization ensemble harness.
//!
//! All schemes preserve the total trade volume and never introduce
//! self-loops. Seeds for individual layers are derived with a documented
//! hash so that serial and parallel execution, and different machines,
//! produce identical ensembles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Layer, TradeFlowPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Every flow is moved to a uniformly random distinct off-diagonal cell;
    /// preserves link count (hence average degree) and total volume.
    FixDegree,
    /// Every flow keeps its importer and weight but gets a uniformly
    /// redrawn exporter; preserves each importer's in-strength and
    /// in-flow count (collisions merge by summation).
    FixInDeg,
    /// Link positions stay fixed; the multiset of weights is permuted
    /// among them; preserves in- and out-degrees of every node.
    FixInOutDeg,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::FixDegree => write!(f, "fix-degree"),
            Scheme::FixInDeg => write!(f, "fix-in-deg"),
            Scheme::FixInOutDeg => write!(f, "fix-in-out-deg"),
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fix-degree" => Ok(Scheme::FixDegree),
            "fix-in-deg" => Ok(Scheme::FixInDeg),
            "fix-in-out-deg" => Ok(Scheme::FixInOutDeg),
            other => Err(format!(
                "unknown scheme `{other}` (expected fix-degree|fix-in-deg|fix-in-out-deg)"
            )),
        }
    }
}

/// Layer seed derivation: SHA-256 over the little-endian base seed, the
/// resource id bytes, a zero separator, the little-endian year, and the
/// little-endian realization index. The digest is the ChaCha8 key.
pub fn derive_rng(base_seed: u64, resource: &str, year: i32, realization: u32) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update(resource.as_bytes());
    hasher.update([0u8]);
    hasher.update(year.to_le_bytes());
    hasher.update(realization.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Assigns every flow to a fresh uniformly random ordered (exporter,
/// importer) pair, all pairs distinct, no self-loops.
pub fn randomize_fix_degree(layer: &Layer, rng: &mut impl Rng) -> Result<Layer> {
    let n = layer.node_count();
    let cells = n.saturating_mul(n.saturating_sub(1));
    let flows: Vec<f64> = layer.edges().map(|(_, _, w)| w).collect();
    if flows.len() > cells {
        return Err(Error::TooManyFlows(flows.len(), cells));
    }
    let picks = rand::seq::index::sample(rng, cells, flows.len());
    let mut out = Layer::new(n);
    for (w, cell) in flows.into_iter().zip(picks.iter()) {
        let i = cell / (n - 1);
        let r = cell % (n - 1);
        let j = if r >= i { r + 1 } else { r };
        out.insert(i, j, w);
    }
    Ok(out)
}

/// Redraws the exporter of every flow uniformly from all countries except
/// the importer; flows that land on the same cell are merged by summation,
/// which conserves every importer's in-strength exactly.
pub fn randomize_fix_indeg(layer: &Layer, rng: &mut impl Rng) -> Result<Layer> {
    let n = layer.node_count();
    if n < 2 && !layer.is_empty() {
        return Err(Error::LayerTooSmall);
    }
    let mut out = Layer::new(n);
    for (_, j, w) in layer.edges() {
        let draw = rng.random_range(0..n - 1);
        let exporter = if draw >= j { draw + 1 } else { draw };
        out.add(exporter, j, w);
    }
    Ok(out)
}

/// Keeps the link set fixed and permutes the weight multiset uniformly
/// among the links.
pub fn randomize_fix_inout(layer: &Layer, rng: &mut impl Rng) -> Layer {
    let positions: Vec<(usize, usize)> = layer.edges().map(|(i, j, _)| (i, j)).collect();
    let mut weights: Vec<f64> = layer.edges().map(|(_, _, w)| w).collect();
    weights.shuffle(rng);
    let mut out = Layer::new(layer.node_count());
    for ((i, j), w) in positions.into_iter().zip(weights) {
        out.insert(i, j, w);
    }
    out
}

pub fn randomize_layer(layer: &Layer, scheme: Scheme, rng: &mut impl Rng) -> Result<Layer> {
    match scheme {
        Scheme::FixDegree => randomize_fix_degree(layer, rng),
        Scheme::FixInDeg => randomize_fix_indeg(layer, rng),
        Scheme::FixInOutDeg => Ok(randomize_fix_inout(layer, rng)),
    }
}

/// One randomized surrogate of the panel: every value layer is randomized
/// under `scheme` with its derived seed. The mass layers are dropped —
/// randomization studies network effects of the value topology, and moved
/// flows have no meaningful mass counterpart; mass-based indicators must be
/// taken from the original panel.
pub fn randomize_panel(
    panel: &TradeFlowPanel,
    scheme: Scheme,
    base_seed: u64,
    realization: u32,
) -> Result<TradeFlowPanel> {
    let mut out = panel.clone();
    out.mass_kg.clear();
    for (resource, by_year) in &mut out.value_usd {
        for (&year, layer) in by_year.iter_mut() {
            let mut rng = derive_rng(base_seed, resource, year, realization);
            *layer = randomize_layer(layer, scheme, &mut rng)?;
        }
    }
    Ok(out)
}

/// Mean, standard error and realization count of one ensemble-averaged
/// quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStat {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub scheme: Scheme,
    pub realizations: u32,
    pub base_seed: u64,
    pub stats: BTreeMap<String, EnsembleStat>,
    /// realizations whose downstream computation failed and were excluded
    pub failed_realizations: usize,
}

/// Runs `realizations` independent randomizations of the panel and averages
/// the named downstream quantities. Seeds are derived deterministically per
/// (resource, year, realization), so results are identical regardless of
/// execution order. Failed realizations are excluded from the means and
/// counted.
pub fn ensemble_run<F>(
    panel: &TradeFlowPanel,
    scheme: Scheme,
    realizations: u32,
    base_seed: u64,
    downstream: F,
) -> Result<EnsembleSummary>
where
    F: Fn(&TradeFlowPanel) -> Result<BTreeMap<String, f64>>,
{
    assert!(realizations >= 1, "need at least one realization");
    let mut per_key: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut failed = 0usize;
    for realization in 0..realizations {
        let surrogate = randomize_panel(panel, scheme, base_seed, realization)?;
        match downstream(&surrogate) {
            Ok(values) => {
                for (k, v) in values {
                    per_key.entry(k).or_default().push(v);
                }
            }
            Err(err) => {
                log::warn!("realization {realization} failed: {err}");
                failed += 1;
            }
        }
    }
    let stats = per_key
        .into_iter()
        .map(|(k, vs)| {
            let n = vs.len();
            let mean = vs.iter().sum::<f64>() / n as f64;
            let std_error = if n > 1 {
                let var =
                    vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            (k, EnsembleStat { mean, std_error, n })
        })
        .collect();
    Ok(EnsembleSummary {
        scheme,
        realizations,
        base_seed,
        stats,
        failed_realizations: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn layer_from(n: usize, edges: &[(usize, usize, f64)]) -> Layer {
        let mut l = Layer::new(n);
        for &(i, j, w) in edges {
            l.insert(i, j, w);
        }
        l
    }

    fn seeded(k: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(k)
    }

    fn sorted_weights(l: &Layer) -> Vec<f64> {
        let mut w: Vec<f64> = l.edges().map(|(_, _, w)| w).collect();
        w.sort_by(f64::total_cmp);
        w
    }

    #[test]
    fn fix_degree_preserves_links_and_volume() {
        let l = layer_from(6, &[(0, 1, 3.0), (2, 3, 5.0), (4, 0, 1.5), (1, 2, 0.25)]);
        for seed in 0..50 {
            let r = randomize_fix_degree(&l, &mut seeded(seed)).unwrap();
            assert_eq!(r.edge_count(), l.edge_count());
            assert_eq!(sorted_weights(&r), sorted_weights(&l));
            assert!(r.edges().all(|(i, j, _)| i != j));
        }
    }

    #[test]
    fn fix_degree_rejects_overfull_layers() {
        let mut l = Layer::new(2);
        l.insert(0, 1, 1.0);
        l.insert(1, 0, 1.0);
        assert!(randomize_fix_degree(&l, &mut seeded(1)).is_ok());
        // 4 flows (including invalid self-loops) cannot fit in 2 cells
        let overfull = layer_from(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            randomize_fix_degree(&overfull, &mut seeded(1)),
            Err(Error::TooManyFlows(4, 2))
        ));
    }

    #[test]
    fn fix_degree_single_link_is_uniform_over_ordered_pairs() {
        let l = layer_from(3, &[(0, 1, 2.0)]);
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            let r = randomize_fix_degree(&l, &mut seeded(seed)).unwrap();
            let (i, j, _) = r.edges().next().unwrap();
            *counts.entry((i, j)).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (&pair, &c) in &counts {
            let freq = c as f64 / trials as f64;
            assert!(
                (freq - 1.0 / 6.0).abs() < 0.02,
                "pair {pair:?} has frequency {freq}"
            );
        }
    }

    #[test]
    fn fix_indeg_preserves_in_strength_and_importers() {
        let l = layer_from(
            5,
            &[(0, 3, 2.0), (1, 3, 4.0), (2, 4, 1.0), (3, 4, 0.5), (0, 4, 8.0)],
        );
        for seed in 0..50 {
            let r = randomize_fix_indeg(&l, &mut seeded(seed)).unwrap();
            assert_eq!(r.column_sums(), l.column_sums());
            let importers =
                |x: &Layer| x.edges().map(|(_, j, _)| j).collect::<BTreeSet<_>>();
            assert_eq!(importers(&r), importers(&l));
            assert!(r.edges().all(|(i, j, _)| i != j));
            assert!((r.total_weight() - l.total_weight()).abs() < 1e-12);
        }
    }

    #[test]
    fn fix_indeg_star_changes_eigenvalue_often() {
        // hub 0 feeds 1..4 and receives a little back; randomizing the
        // exporters should almost always change the spectrum
        let l = layer_from(
            5,
            &[
                (0, 1, 0.9),
                (0, 2, 0.9),
                (0, 3, 0.9),
                (0, 4, 0.9),
                (1, 0, 0.2),
                (2, 0, 0.2),
            ],
        );
        let lam = crate::graph::leading_eigenvalue(&l, 1e-12, 1_000_000).unwrap();
        let mut changed = 0;
        let trials = 200;
        for seed in 0..trials {
            let r = randomize_fix_indeg(&l, &mut seeded(seed)).unwrap();
            let lam_r = crate::graph::leading_eigenvalue(&r, 1e-12, 1_000_000).unwrap();
            if (lam_r - lam).abs() > 1e-6 {
                changed += 1;
            }
        }
        assert!(
            changed as f64 / trials as f64 > 0.9,
            "only {changed}/{trials} randomizations changed the eigenvalue"
        );
    }

    #[test]
    fn fix_inout_preserves_adjacency_and_weight_multiset() {
        let l = layer_from(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (3, 0, 4.0)]);
        for seed in 0..50 {
            let r = randomize_fix_inout(&l, &mut seeded(seed));
            let pos = |x: &Layer| x.edges().map(|(i, j, _)| (i, j)).collect::<Vec<_>>();
            assert_eq!(pos(&r), pos(&l));
            assert_eq!(sorted_weights(&r), sorted_weights(&l));
        }
    }

    #[test]
    fn fix_inout_on_equal_weights_is_identity() {
        let l = layer_from(3, &[(0, 1, 2.0), (1, 2, 2.0), (2, 0, 2.0)]);
        let r = randomize_fix_inout(&l, &mut seeded(99));
        assert_eq!(r, l);
    }

    #[test]
    fn derive_rng_is_deterministic_and_distinct() {
        let a: u64 = derive_rng(7, "CU", 2000, 0).random();
        let b: u64 = derive_rng(7, "CU", 2000, 0).random();
        assert_eq!(a, b);
        let c: u64 = derive_rng(7, "CU", 2000, 1).random();
        let d: u64 = derive_rng(7, "CU", 2001, 0).random();
        let e: u64 = derive_rng(8, "CU", 2000, 0).random();
        assert!(a != c && a != d && a != e);
    }
}

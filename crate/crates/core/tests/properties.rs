//! Randomized property tests for the algebraic invariants that the unit
//! tests only sample pointwise.

use proptest::prelude::*;

use traderisk_core::graph;
use traderisk_core::ingest::{self, Direction, RawTradeRecord};
use traderisk_core::model::{CountryRecord, CountryRegistry, Layer, ResourceRecord, ResourceRegistry};
use traderisk_core::stats;
use traderisk_core::{archive, fixture};

const IDS: [&str; 6] = ["C0", "C1", "C2", "C3", "C4", "C5"];

fn registries() -> (CountryRegistry, ResourceRegistry) {
    let countries = CountryRegistry::new(
        IDS.iter()
            .map(|id| {
                let mut c = CountryRecord::new(*id);
                c.ps_by_year.insert(2005, 50.0);
                c
            })
            .collect(),
    )
    .unwrap();
    let resources = ResourceRegistry::new(vec![ResourceRecord::new("CU")]).unwrap();
    (countries, resources)
}

/// A random set of distinct exporter -> importer cells with positive values.
fn flows() -> impl Strategy<Value = Vec<(usize, usize, f64, f64)>> {
    proptest::collection::btree_map(
        (0..IDS.len(), 0..IDS.len()).prop_filter("no self flows", |(i, j)| i != j),
        (0.1f64..100.0, 0.1f64..50.0),
        1..20,
    )
    .prop_map(|m| m.into_iter().map(|((i, j), (v, kg))| (i, j, v, kg)).collect())
}

fn records(cells: &[(usize, usize, f64, f64)]) -> Vec<RawTradeRecord> {
    cells
        .iter()
        .map(|&(i, j, v, kg)| RawTradeRecord {
            year: 2005,
            exporter: IDS[i].to_string(),
            importer: IDS[j].to_string(),
            resource: "CU".to_string(),
            direction: Direction::Export,
            value_usd: v,
            mass_kg: Some(kg),
        })
        .collect()
}

fn layer_from(cells: &[(usize, usize, f64)]) -> Layer {
    let n = 1 + cells.iter().map(|&(i, j, _)| i.max(j)).max().unwrap_or(0);
    let mut layer = Layer::new(n);
    for &(i, j, w) in cells {
        if i != j {
            layer.insert(i, j, w);
        }
    }
    layer
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn leading_eigenvalue_is_positively_homogeneous(
        cells in proptest::collection::vec((0..8usize, 0..8usize, 0.1f64..10.0), 1..30),
        c in 0.05f64..20.0,
    ) {
        let layer = layer_from(&cells);
        let lam = graph::leading_eigenvalue(&layer, 1e-12, 1_000_000).unwrap();
        let scaled = layer.map_weights(|_, _, w| c * w);
        let lam_scaled = graph::leading_eigenvalue(&scaled, 1e-12, 1_000_000).unwrap();
        prop_assert!((lam_scaled - c * lam).abs() <= 1e-8 * (c * lam).max(1.0));
    }

    #[test]
    fn reconcile_is_order_independent(
        cells in flows(),
        swaps in proptest::collection::vec((0..19usize, 0..19usize), 0..16),
    ) {
        let base = records(&cells);
        let mut shuffled = base.clone();
        for &(a, b) in &swaps {
            let (a, b) = (a % shuffled.len(), b % shuffled.len());
            shuffled.swap(a, b);
        }
        let (countries, resources) = registries();
        let p1 = ingest::reconcile(&base, countries.clone(), resources.clone(), vec![2005]).unwrap();
        let p2 = ingest::reconcile(&shuffled, countries, resources, vec![2005]).unwrap();
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn threshold_is_idempotent_and_never_adds_volume(
        cells in flows(),
        theta in 0.0f64..0.4,
    ) {
        let (countries, resources) = registries();
        let panel = ingest::reconcile(&records(&cells), countries, resources, vec![2005]).unwrap();
        let once = ingest::apply_threshold(&panel, theta);
        let twice = ingest::apply_threshold(&once, theta);
        prop_assert_eq!(&once, &twice);
        let volume = |p: &traderisk_core::model::TradeFlowPanel| {
            p.value_layer("CU", 2005).map_or(0.0, Layer::total_weight)
        };
        prop_assert!(volume(&once) <= volume(&panel) + 1e-9);
    }

    #[test]
    fn condensation_conserves_external_volume(cells in flows()) {
        let (mut countries_vec, resources) = {
            let (c, r) = registries();
            (c.iter().cloned().collect::<Vec<_>>(), r)
        };
        // tag C0 and C1 as members of the region to merge
        for c in countries_vec.iter_mut().take(2) {
            c.region_tags.insert("REG".to_string());
        }
        let countries = CountryRegistry::new(countries_vec).unwrap();
        let panel = ingest::reconcile(&records(&cells), countries, resources, vec![2005]).unwrap();
        let condensed = ingest::condense_region(&panel, "REG", "R").unwrap();

        let internal: f64 = panel
            .value_layer("CU", 2005)
            .map_or(0.0, |l| {
                l.edges()
                    .filter(|&(i, j, _)| i < 2 && j < 2)
                    .map(|(_, _, w)| w)
                    .sum()
            });
        let before = panel.value_layer("CU", 2005).map_or(0.0, Layer::total_weight);
        let after = condensed.value_layer("CU", 2005).map_or(0.0, Layer::total_weight);
        prop_assert!((after - (before - internal)).abs() < 1e-9);
    }

    #[test]
    fn pearson_is_symmetric_and_affine_invariant(
        xy in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..40),
        a in 0.1f64..5.0,
        b in -3.0f64..3.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(fwd) = stats::pearson(&x, &y) else { return Ok(()); };
        let rev = stats::pearson(&y, &x).unwrap();
        prop_assert!((fwd.rho - rev.rho).abs() < 1e-12);
        prop_assert!((fwd.p_value - rev.p_value).abs() < 1e-12);
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let scaled = stats::pearson(&xs, &y).unwrap();
        prop_assert!((fwd.rho - scaled.rho).abs() < 1e-9);
    }
}

#[test]
fn archive_roundtrip_preserves_generated_panels() {
    for seed in [1, 7, 42] {
        let panel = fixture::generate(seed).unwrap();
        let json = archive::to_json(&panel).unwrap();
        let back = archive::from_json(&json).unwrap();
        assert_eq!(panel, back, "seed {seed}");
    }
}

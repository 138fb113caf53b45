//! End-to-end indicator pipeline: threshold the reconciled panel, condense
//! configured country groups, and compute the global and regional indicator
//! tables, plus small helpers to flatten results for reports and ensembles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::indicators::{self, IndicatorParams, StabilityMode};
use crate::ingest;
use crate::model::{normalize_id, IndicatorTable, TradeFlowPanel};

/// A region of interest. With `condense_tag` set, all countries carrying
/// that tag are merged into a single node named `id` before any indicator
/// is computed; without it, `id` must already be a country in the panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub id: String,
    #[serde(default)]
    pub condense_tag: Option<String>,
}

/// Full parameter set of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// import-share cutoff: flows with share <= threshold are dropped
    pub threshold: f64,
    pub alpha_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stability: StabilityMode,
    pub regions: Vec<RegionSpec>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        let ip = IndicatorParams::default();
        PipelineParams {
            threshold: 0.01,
            alpha_factor: ip.alpha_factor,
            tol: ip.tol,
            max_iter: ip.max_iter,
            stability: StabilityMode::default(),
            regions: Vec::new(),
        }
    }
}

impl PipelineParams {
    pub fn indicator_params(&self) -> IndicatorParams {
        IndicatorParams {
            alpha_factor: self.alpha_factor,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Applies the share threshold and condenses every region that asks for it.
pub fn prepare_panel(panel: &TradeFlowPanel, params: &PipelineParams) -> Result<TradeFlowPanel> {
    let mut prepared = ingest::apply_threshold(panel, params.threshold);
    for region in &params.regions {
        if let Some(tag) = &region.condense_tag {
            prepared = ingest::condense_region(&prepared, tag, &region.id)?;
        }
    }
    Ok(prepared)
}

/// Result of a full pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub table: IndicatorTable,
    /// (resource, year) layers whose spectral scores were degenerate and
    /// were skipped in the PageRank time averages
    pub degenerate_layers: usize,
}

/// Runs threshold + condensation + all indicators on a reconciled panel.
pub fn compute_indicator_table(
    panel: &TradeFlowPanel,
    params: &PipelineParams,
) -> Result<PipelineOutcome> {
    let prepared = prepare_panel(panel, params)?;
    let ip = params.indicator_params();
    let global = indicators::global_table(&prepared, params.stability, &ip)?;
    let mut regional: BTreeMap<String, BTreeMap<String, _>> = BTreeMap::new();
    let mut degenerate_layers = 0usize;
    let resource_ids: Vec<String> = prepared.resources.ids().map(str::to_string).collect();
    for resource in &resource_ids {
        let mut per_region = BTreeMap::new();
        for region in &params.regions {
            let outcome = indicators::regional_indicators(
                &prepared,
                resource,
                &region.id,
                params.stability,
                &ip,
            )?;
            degenerate_layers += outcome.degenerate_years;
            per_region.insert(normalize_id(&region.id), outcome.indicators);
        }
        regional.insert(resource.clone(), per_region);
    }
    // each degenerate layer was counted once per region
    if !params.regions.is_empty() {
        degenerate_layers /= params.regions.len();
    }
    Ok(PipelineOutcome {
        table: IndicatorTable { global, regional },
        degenerate_layers,
    })
}

/// One row of the per-region scatter export, pairing each resource's risk
/// indicators with its observed price volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub resource: String,
    pub region: String,
    pub traderisk: Option<f64>,
    pub instrength_traderisk: Option<f64>,
    pub pagerank: Option<f64>,
    pub import_reliance: Option<f64>,
    pub volatility: Option<f64>,
    pub trade_barrier: Option<f64>,
}

/// Flattens the regional table into rows ordered by (resource, region).
pub fn scatter_rows(table: &IndicatorTable) -> Vec<ScatterRow> {
    let mut rows = Vec::new();
    for (resource, per_region) in &table.regional {
        for (region, ind) in per_region {
            rows.push(ScatterRow {
                resource: resource.clone(),
                region: region.clone(),
                traderisk: ind.traderisk,
                instrength_traderisk: ind.instrength_traderisk,
                pagerank: ind.pagerank,
                import_reliance: ind.import_reliance,
                volatility: ind.volatility,
                trade_barrier: ind.trade_barrier,
            });
        }
    }
    rows
}

/// Ranks resources for one region by TradeRisk, rank 1 = highest risk.
/// Resources without a TradeRisk value are omitted; exact ties resolve
/// lexicographically by resource id.
pub fn traderisk_ranks(table: &IndicatorTable, region: &str) -> Vec<(String, usize, f64)> {
    let region = normalize_id(region);
    let mut scored: Vec<(String, f64)> = table
        .regional
        .iter()
        .filter_map(|(resource, per_region)| {
            per_region
                .get(&region)
                .and_then(|ind| ind.traderisk)
                .map(|tr| (resource.clone(), tr))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (resource, tr))| (resource, i + 1, tr))
        .collect()
}

/// Flattens an indicator table into named scalars, the shape consumed by
/// ensemble aggregation. Keys look like `lambda:CU` and `traderisk:CU:EU`.
pub fn flatten_table(table: &IndicatorTable) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (resource, g) in &table.global {
        let mut put = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                out.insert(format!("{name}:{resource}"), v);
            }
        };
        put("avg_degree", g.avg_degree);
        put("lambda", g.lambda);
        put("scc_fraction", g.scc_fraction);
    }
    for (resource, per_region) in &table.regional {
        for (region, ind) in per_region {
            let mut put = |name: &str, v: Option<f64>| {
                if let Some(v) = v {
                    out.insert(format!("{name}:{resource}:{region}"), v);
                }
            };
            put("pagerank", ind.pagerank);
            put("in_strength", ind.in_strength);
            put("in_degree", ind.in_degree);
            put("traderisk", ind.traderisk);
            put("instrength_traderisk", ind.instrength_traderisk);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        CountryRecord, CountryRegistry, Layer, ResourceRecord, ResourceRegistry,
    };

    fn sample_panel() -> TradeFlowPanel {
        // Four countries; E1 and E2 form a condensable bloc. Two resources.
        let mut recs = vec![
            CountryRecord::new("AA"),
            CountryRecord::new("BB"),
            CountryRecord::new("E1"),
            CountryRecord::new("E2"),
        ];
        for (i, rec) in recs.iter_mut().enumerate() {
            rec.ps_by_year.insert(2005, 20.0 * (i as f64 + 1.0));
            rec.ps_by_year.insert(2006, 20.0 * (i as f64 + 1.0));
        }
        recs[2].region_tags.insert("BLOC".into());
        recs[3].region_tags.insert("BLOC".into());
        let countries = CountryRegistry::new(recs).unwrap();
        let mut cu = ResourceRecord::new("CU");
        cu.import_reliance.insert("EU".into(), 0.5);
        cu.import_reliance.insert("AA".into(), 0.3);
        let zn = ResourceRecord::new("ZN");
        let resources = ResourceRegistry::new(vec![cu, zn]).unwrap();
        let mut panel = TradeFlowPanel::empty(countries, resources, vec![2005, 2006]);
        for year in [2005, 2006] {
            let mut layer = Layer::new(4);
            layer.insert(0, 2, 50.0); // AA -> E1
            layer.insert(1, 3, 30.0); // BB -> E2
            layer.insert(2, 0, 20.0); // E1 -> AA
            layer.insert(3, 1, 10.0); // E2 -> BB
            layer.insert(0, 1, 0.09); // tiny AA -> BB: 0.09/10.09 < 1%
            panel.value_usd.entry("CU".into()).or_default().insert(year, layer);
        }
        let mut zn_layer = Layer::new(4);
        zn_layer.insert(0, 1, 5.0);
        panel.value_usd.entry("ZN".into()).or_default().insert(2005, zn_layer);
        panel
    }

    fn params() -> PipelineParams {
        PipelineParams {
            regions: vec![
                RegionSpec {
                    id: "EU".into(),
                    condense_tag: Some("BLOC".into()),
                },
                RegionSpec {
                    id: "AA".into(),
                    condense_tag: None,
                },
            ],
            ..PipelineParams::default()
        }
    }

    #[test]
    fn prepare_thresholds_then_condenses() {
        let panel = sample_panel();
        let prepared = prepare_panel(&panel, &params()).unwrap();
        assert_eq!(prepared.countries.len(), 3);
        let aa = prepared.countries.index_of("AA").unwrap();
        let bb = prepared.countries.index_of("BB").unwrap();
        let eu = prepared.countries.index_of("EU").unwrap();
        let layer = prepared.value_layer("CU", 2005).unwrap();
        // the tiny AA->BB flow fell to the threshold before condensation
        assert!(!layer.contains_edge(aa, bb));
        // bloc-internal flows would be deleted; here there were none, and
        // flows into/out of the bloc are merged onto EU
        assert_eq!(layer.get(aa, eu), 50.0);
        assert_eq!(layer.get(bb, eu), 30.0);
        assert_eq!(layer.get(eu, aa), 20.0);
        assert_eq!(layer.get(eu, bb), 10.0);
    }

    #[test]
    fn table_covers_all_resources_and_regions() {
        let outcome = compute_indicator_table(&sample_panel(), &params()).unwrap();
        let table = &outcome.table;
        assert_eq!(table.global.len(), 2);
        assert_eq!(table.regional["CU"].len(), 2);
        let eu = &table.regional["CU"]["EU"];
        assert!(eu.pagerank.is_some());
        assert_eq!(eu.import_reliance, Some(0.5));
        assert!(eu.traderisk.is_some());
        // ZN has no import reliance for either region
        assert!(table.regional["ZN"]["EU"].traderisk.is_none());
        // no mass layers at all: no volume, no scarcity
        assert!(table.global["CU"].total_trade_volume_kg.is_none());
    }

    #[test]
    fn ranks_are_descending_and_start_at_one() {
        let outcome = compute_indicator_table(&sample_panel(), &params()).unwrap();
        let ranks = traderisk_ranks(&outcome.table, "EU");
        assert_eq!(ranks.len(), 1); // only CU has IR for EU
        assert_eq!(ranks[0].1, 1);
        assert_eq!(ranks[0].0, "CU");

        // synthetic table with a tie
        let mut table = outcome.table.clone();
        let mut tied = table.regional["CU"]["EU"].clone();
        tied.traderisk = table.regional["CU"]["EU"].traderisk;
        table
            .regional
            .entry("AB".into())
            .or_default()
            .insert("EU".into(), tied);
        let ranks = traderisk_ranks(&table, "EU");
        assert_eq!(ranks[0].0, "AB"); // lexicographic tie-break
        assert_eq!(ranks[1].0, "CU");
        assert_eq!((ranks[0].1, ranks[1].1), (1, 2));
    }

    #[test]
    fn scatter_and_flatten_are_complete() {
        let outcome = compute_indicator_table(&sample_panel(), &params()).unwrap();
        let rows = scatter_rows(&outcome.table);
        assert_eq!(rows.len(), 4); // 2 resources x 2 regions
        assert!(rows.iter().any(|r| r.resource == "CU" && r.region == "EU"));
        let flat = flatten_table(&outcome.table);
        assert!(flat.contains_key("lambda:CU"));
        assert!(flat.contains_key("pagerank:CU:EU"));
        assert!(flat.contains_key("traderisk:CU:EU"));
        // ZN's single-edge layer is spectrally degenerate: no PageRank, but
        // the in-strength indicators are still defined
        assert!(!flat.contains_key("pagerank:ZN:EU"));
        assert!(flat.contains_key("in_strength:ZN:EU"));
        assert!(!flat.contains_key("traderisk:ZN:EU"));
    }

    #[test]
    fn unknown_plain_region_is_an_error() {
        let mut p = params();
        p.regions.push(RegionSpec {
            id: "NOPE".into(),
            condense_tag: None,
        });
        assert!(compute_indicator_table(&sample_panel(), &p).is_err());
    }
}

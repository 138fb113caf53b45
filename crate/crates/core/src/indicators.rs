//! Vulnerability networks and all derived indicators: TradeRisk,
//! In-Strength TradeRisk, scarcity, total trade volume, free-on-board prices,
//! price volatility, composite supply risk, and the per-resource global
//! metric table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, PageRank};
use crate::model::{
    GlobalIndicators, Layer, RegionalIndicators, ResourceRegistry, TradeFlowPanel,
    VulnerabilityNetwork,
};

/// Which per-exporter stability score scales the vulnerability rows.
///
/// `None` sets the score to zero, so every exporter carries weight factor 1
/// and the network reduces to plain import shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StabilityMode {
    #[default]
    Ps,
    Rgi,
    None,
}

impl fmt::Display for StabilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityMode::Ps => write!(f, "ps"),
            StabilityMode::Rgi => write!(f, "rgi"),
            StabilityMode::None => write!(f, "none"),
        }
    }
}

impl FromStr for StabilityMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "ps" => Ok(StabilityMode::Ps),
            "rgi" => Ok(StabilityMode::Rgi),
            "none" => Ok(StabilityMode::None),
            other => Err(format!("unknown stability mode `{other}` (expected ps|rgi|none)")),
        }
    }
}

/// Numerical knobs shared by the spectral and PageRank computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorParams {
    pub alpha_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IndicatorParams {
    fn default() -> Self {
        IndicatorParams {
            alpha_factor: graph::DEFAULT_ALPHA_FACTOR,
            tol: graph::DEFAULT_TOL,
            max_iter: graph::DEFAULT_MAX_ITER,
        }
    }
}

/// Stability score of exporter `idx` for the given mode, in [0,100].
///
/// A missing score falls back to the nearest year (PS) and ultimately to 0,
/// i.e. the exporter is treated as maximally unstable, with a warning.
fn stability_score(panel: &TradeFlowPanel, idx: usize, year: i32, mode: StabilityMode) -> f64 {
    let rec = panel.countries.get(idx);
    match mode {
        StabilityMode::None => 0.0,
        StabilityMode::Ps => match rec.ps_nearest(year) {
            Some((ps, from_year)) => {
                if from_year != year {
                    warn!(
                        "country {}: PS for {year} missing, using nearest year {from_year}",
                        rec.id
                    );
                }
                ps
            }
            None => {
                warn!(
                    "country {}: no PS data at all, treating exports as maximally unstable",
                    rec.id
                );
                0.0
            }
        },
        StabilityMode::Rgi => match rec.rgi {
            Some(rgi) => rgi,
            None => {
                warn!(
                    "country {}: no RGI score, treating exports as maximally unstable",
                    rec.id
                );
                0.0
            }
        },
    }
}

/// Builds the vulnerability network for one (resource, year) layer:
/// `V_ij = (1 - s_i/100) * M_ij / sum_i M_ij`, with `s_i` the exporter's
/// stability score under `mode`. Entries that come out exactly zero (fully
/// stable exporter) are dropped so the adjacency invariant `B_ij = 1 iff
/// V_ij > 0` holds on the stored edge set.
pub fn vulnerability_network(
    panel: &TradeFlowPanel,
    resource: &str,
    year: i32,
    mode: StabilityMode,
) -> Result<VulnerabilityNetwork> {
    let layer = panel
        .value_layer(resource, year)
        .ok_or_else(|| Error::MissingLayer {
            resource: resource.to_string(),
            year,
        })?;
    let import_totals = layer.column_sums();
    let mut weights = Layer::new(layer.node_count());
    for (i, j, m) in layer.edges() {
        if import_totals[j] <= 0.0 {
            continue;
        }
        let s = stability_score(panel, i, year, mode);
        let v = (1.0 - s / 100.0) * m / import_totals[j];
        if v > 0.0 {
            weights.insert(i, j, v);
        }
    }
    Ok(VulnerabilityNetwork {
        resource: resource.to_string(),
        year,
        weights,
    })
}

/// Regional indicator computation outcome; `degenerate_years` counts years
/// whose vulnerability layer had a leading eigenvalue below tolerance and
/// were therefore skipped in the PageRank time average.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionalOutcome {
    pub indicators: RegionalIndicators,
    pub degenerate_years: usize,
}

/// Time-averaged regional indicators for (resource, region): PageRank,
/// in-strength, in-degree, TradeRisk `TR = PR * IR`, In-Strength TradeRisk
/// `TR_str = w_in * IR`, import reliance, price volatility, trade barrier.
///
/// Years with a missing layer are skipped from the averages, not zero-filled.
/// When IR is unavailable the TradeRisk indicators are unavailable, not zero.
pub fn regional_indicators(
    panel: &TradeFlowPanel,
    resource: &str,
    region: &str,
    mode: StabilityMode,
    params: &IndicatorParams,
) -> Result<RegionalOutcome> {
    let region_idx = panel
        .countries
        .index_of(region)
        .ok_or_else(|| Error::UnknownRegion(region.to_string()))?;

    let mut pr_values = Vec::new();
    let mut w_in_values = Vec::new();
    let mut k_in_values = Vec::new();
    let mut degenerate_years = 0usize;

    for year in panel.years_with_layer(resource) {
        let vuln = vulnerability_network(panel, resource, year, mode)?;
        let pr: PageRank = graph::pagerank(&vuln.weights, params.alpha_factor, params.tol, params.max_iter)?;
        if pr.degenerate {
            degenerate_years += 1;
        } else {
            pr_values.push(pr.scores[region_idx]);
        }
        let metrics = graph::degrees_and_strengths(&vuln.weights);
        w_in_values.push(metrics.in_strength[region_idx]);
        k_in_values.push(metrics.in_degree[region_idx] as f64);
    }

    let pagerank = mean(&pr_values);
    let in_strength = mean(&w_in_values);
    let in_degree = mean(&k_in_values);

    let rec = panel.resources.by_id(resource);
    let import_reliance = rec.and_then(|r| r.import_reliance.get(&crate::model::normalize_id(region)).copied());
    let trade_barrier = rec.and_then(|r| r.trade_barriers.get(&crate::model::normalize_id(region)).copied());

    let traderisk = match (pagerank, import_reliance) {
        (Some(pr), Some(ir)) => Some(pr * ir),
        _ => None,
    };
    let instrength_traderisk = match (in_strength, import_reliance) {
        (Some(w), Some(ir)) => Some(w * ir),
        _ => None,
    };

    let (_, volatility) = price_and_volatility(panel, resource, region_idx);

    Ok(RegionalOutcome {
        indicators: RegionalIndicators {
            pagerank,
            in_strength,
            in_degree,
            traderisk,
            instrength_traderisk,
            import_reliance,
            volatility,
            trade_barrier,
        },
        degenerate_years,
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Total traded mass of `resource` over all years and flows, in kg.
pub fn total_trade_volume(panel: &TradeFlowPanel, resource: &str) -> Option<f64> {
    let by_year = panel.mass_kg.get(&crate::model::normalize_id(resource))?;
    let ttv: f64 = by_year.values().map(Layer::total_weight).sum();
    if ttv > 0.0 {
        Some(ttv)
    } else {
        None
    }
}

/// Scarcity `S = ln(TTV / R)`, natural log. Unavailable when reserves are
/// missing or zero, or when no traded mass is recorded.
pub fn scarcity(panel: &TradeFlowPanel, resource: &str) -> Option<f64> {
    let reserves = panel.resources.by_id(resource)?.reserves_kg?;
    if reserves <= 0.0 {
        return None;
    }
    let ttv = total_trade_volume(panel, resource)?;
    Some((ttv / reserves).ln())
}

/// Free-on-board export price series of one country for one resource:
/// `p(t) = sum_j M_ij(t) / sum_j K_ij(t)` over the exports of country `i`.
///
/// Years with zero exported mass but nonzero exported value are excluded
/// with a warning (no meaningful unit value).
pub fn price_series(panel: &TradeFlowPanel, resource: &str, country_idx: usize) -> Vec<(i32, f64)> {
    let mut series = Vec::new();
    for year in panel.years_with_layer(resource) {
        let value = panel
            .value_layer(resource, year)
            .map(|l| l.row_sums()[country_idx])
            .unwrap_or(0.0);
        let mass = panel
            .mass_layer(resource, year)
            .map(|l| l.row_sums()[country_idx])
            .unwrap_or(0.0);
        if mass > 0.0 && value > 0.0 {
            series.push((year, value / mass));
        } else if value > 0.0 && panel.mass_layer(resource, year).is_some() {
            // only noteworthy when mass data exists for this layer but not
            // for this country's exports; resources without any mass data
            // simply have no price series
            warn!(
                "{}: exports of {} in {} have value but no mass; year excluded from price series",
                panel.countries.get(country_idx).id,
                resource,
                year
            );
        }
    }
    series
}

/// Price series and volatility: log returns `v(t) = ln(p(t)/p(t-1))` over
/// consecutive available years only, volatility = sample (n-1) standard
/// deviation of the returns. Fewer than 2 returns yields no volatility.
pub fn price_and_volatility(
    panel: &TradeFlowPanel,
    resource: &str,
    country_idx: usize,
) -> (Vec<(i32, f64)>, Option<f64>) {
    let series = price_series(panel, resource, country_idx);
    let mut returns = Vec::new();
    for pair in series.windows(2) {
        let (y0, p0) = pair[0];
        let (y1, p1) = pair[1];
        if y1 == y0 + 1 && p0 > 0.0 && p1 > 0.0 {
            returns.push((p1 / p0).ln());
        }
    }
    let sigma = if returns.len() >= 2 {
        let m = returns.iter().sum::<f64>() / returns.len() as f64;
        let var =
            returns.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (returns.len() - 1) as f64;
        Some(var.sqrt())
    } else {
        None
    };
    (series, sigma)
}

/// Composite supply risk per resource: each source list (NRC, BGS, EC) is
/// min-max rescaled over the resources where it is present (max -> 1,
/// min -> 0), and CSR is the mean of the rescaled values over the sources
/// available for the resource. A source with fewer than two distinct values
/// is skipped entirely.
pub fn composite_supply_risk(resources: &ResourceRegistry) -> BTreeMap<String, f64> {
    let sources: [fn(&crate::model::ResourceRecord) -> Option<f64>; 3] = [
        |r| r.sr_nrc,
        |r| r.sr_bgs,
        |r| r.sr_ec,
    ];

    let mut rescaled: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for get in sources {
        let present: Vec<(&str, f64)> = resources
            .iter()
            .filter_map(|r| get(r).map(|v| (r.id.as_str(), v)))
            .collect();
        let min = present.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        let max = present
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            continue; // fewer than two distinct values: rescale undefined
        }
        for (id, v) in present {
            rescaled
                .entry(id.to_string())
                .or_default()
                .push((v - min) / (max - min));
        }
    }

    rescaled
        .into_iter()
        .map(|(id, vs)| {
            let csr = vs.iter().sum::<f64>() / vs.len() as f64;
            (id, csr)
        })
        .collect()
}

/// Per-resource global metrics: time-averaged average degree, leading
/// eigenvalue and SCC fraction of the vulnerability layers, plus scarcity,
/// total trade volume and composite supply risk.
pub fn global_table(
    panel: &TradeFlowPanel,
    mode: StabilityMode,
    params: &IndicatorParams,
) -> Result<BTreeMap<String, GlobalIndicators>> {
    let csr = composite_supply_risk(&panel.resources);
    let mut out = BTreeMap::new();
    for resource in panel.resources.ids().map(str::to_string).collect::<Vec<_>>() {
        let mut k_values = Vec::new();
        let mut lambda_values = Vec::new();
        let mut scc_values = Vec::new();
        for year in panel.years_with_layer(&resource) {
            let vuln = vulnerability_network(panel, &resource, year, mode)?;
            let metrics = graph::degrees_and_strengths(&vuln.weights);
            k_values.push(metrics.avg_degree);
            lambda_values.push(graph::leading_eigenvalue(
                &vuln.weights,
                params.tol,
                params.max_iter,
            )?);
            scc_values.push(graph::largest_scc_fraction(&vuln.weights));
        }
        out.insert(
            resource.clone(),
            GlobalIndicators {
                avg_degree: mean(&k_values),
                lambda: mean(&lambda_values),
                scc_fraction: mean(&scc_values),
                scarcity: scarcity(panel, &resource),
                total_trade_volume_kg: total_trade_volume(panel, &resource),
                csr: csr.get(&resource).copied(),
            },
        );
    }
    Ok(out)
}

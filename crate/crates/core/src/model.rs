//! Core domain types: registries, sparse directed layers, panel-indexed
//! multiplex networks and the indicator/correlation result tables.
//!
//! All types are immutable after construction and safe to share across
//! parallel workers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-country registry entry.
///
/// `ps_by_year` holds the political stability score (0 = most unstable,
/// 100 = most stable). `rgi` is the resource governance score on the same
/// scale, time-constant when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub id: String,
    pub ps_by_year: BTreeMap<i32, f64>,
    pub rgi: Option<f64>,
    pub region_tags: BTreeSet<String>,
}

impl CountryRecord {
    pub fn new(id: impl Into<String>) -> Self {
        CountryRecord {
            id: normalize_id(&id.into()),
            ps_by_year: BTreeMap::new(),
            rgi: None,
            region_tags: BTreeSet::new(),
        }
    }

    /// Stability score for `year`, falling back to the nearest available
    /// year for this country. Ties between an earlier and a later year at the
    /// same distance resolve to the earlier one. Returns the score together
    /// with the year it was taken from.
    pub fn ps_nearest(&self, year: i32) -> Option<(f64, i32)> {
        if let Some(&ps) = self.ps_by_year.get(&year) {
            return Some((ps, year));
        }
        let below = self.ps_by_year.range(..year).next_back();
        let above = self.ps_by_year.range(year + 1..).next();
        match (below, above) {
            (Some((&yb, &vb)), Some((&ya, &va))) => {
                if (year - yb) <= (ya - year) {
                    Some((vb, yb))
                } else {
                    Some((va, ya))
                }
            }
            (Some((&yb, &vb)), None) => Some((vb, yb)),
            (None, Some((&ya, &va))) => Some((va, ya)),
            (None, None) => None,
        }
    }
}

/// Identifiers are opaque strings normalized to uppercase; numeric node
/// indices are an internal detail and never appear in files.
pub fn normalize_id(id: &str) -> String {
    id.trim().to_uppercase()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountryRegistry {
    records: Vec<CountryRecord>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl CountryRegistry {
    /// Builds a registry from records, sorted by id. Fails on duplicate ids.
    pub fn new(mut records: Vec<CountryRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            if index.insert(rec.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(rec.id.clone()));
            }
        }
        Ok(CountryRegistry { records, index })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(&normalize_id(id)).copied()
    }

    pub fn get(&self, idx: usize) -> &CountryRecord {
        &self.records[idx]
    }

    pub fn by_id(&self, id: &str) -> Option<&CountryRecord> {
        self.index_of(id).map(|i| &self.records[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &CountryRecord> {
        self.records.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    /// Indices of all countries carrying `tag`.
    pub fn with_tag(&self, tag: &str) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.region_tags.contains(tag))
            .map(|(i, _)| i)
            .collect()
    }

    /// Rebuilds the id index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
    }
}

/// Byproduct/major-metal classification, carried as pass-through metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    MajorMetal,
    Byproduct,
    Other,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::MajorMetal => write!(f, "major-metal"),
            Classification::Byproduct => write!(f, "byproduct"),
            Classification::Other => write!(f, "other"),
        }
    }
}

/// Per-resource registry entry: reserves, raw supply-risk source scores,
/// per-region import reliance and trade barriers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub id: String,
    pub reserves_kg: Option<f64>,
    pub sr_nrc: Option<f64>,
    pub sr_bgs: Option<f64>,
    pub sr_ec: Option<f64>,
    /// region id -> net import reliance, fraction in [0,1]
    pub import_reliance: BTreeMap<String, f64>,
    /// region id -> ad-valorem tariff equivalent, nonnegative
    pub trade_barriers: BTreeMap<String, f64>,
    pub classification: Option<Classification>,
}

impl ResourceRecord {
    pub fn new(id: impl Into<String>) -> Self {
        ResourceRecord {
            id: normalize_id(&id.into()),
            reserves_kg: None,
            sr_nrc: None,
            sr_bgs: None,
            sr_ec: None,
            import_reliance: BTreeMap::new(),
            trade_barriers: BTreeMap::new(),
            classification: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceRegistry {
    records: Vec<ResourceRecord>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl ResourceRegistry {
    pub fn new(mut records: Vec<ResourceRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            if index.insert(rec.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(rec.id.clone()));
            }
        }
        Ok(ResourceRegistry { records, index })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn by_id(&self, id: &str) -> Option<&ResourceRecord> {
        self.index.get(&normalize_id(id)).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(&normalize_id(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ResourceRecord> {
        self.records.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn reindex(&mut self) {
        self.index = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
    }
}

/// Sparse directed weighted network over a fixed node index space.
///
/// Edge `(i, j)` carries the flow from exporter `i` to importer `j`.
/// Only non-zero flows are stored; iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LayerRepr", into = "LayerRepr")]
pub struct Layer {
    n: usize,
    edges: BTreeMap<(u32, u32), f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    n: usize,
    edges: Vec<(u32, u32, f64)>,
}

impl From<LayerRepr> for Layer {
    fn from(r: LayerRepr) -> Self {
        Layer {
            n: r.n,
            edges: r.edges.into_iter().map(|(i, j, w)| ((i, j), w)).collect(),
        }
    }
}

impl From<Layer> for LayerRepr {
    fn from(l: Layer) -> Self {
        LayerRepr {
            n: l.n,
            edges: l.edges.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        }
    }
}

impl Layer {
    pub fn new(n: usize) -> Self {
        Layer {
            n,
            edges: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Stores the weight as given, replacing any previous value. Validation
    /// of signs and self-loops is left to `validate_panel`.
    pub fn insert(&mut self, exporter: usize, importer: usize, weight: f64) {
        debug_assert!(exporter < self.n && importer < self.n);
        self.edges.insert((exporter as u32, importer as u32), weight);
    }

    /// Adds onto an existing edge weight (used when merging flows).
    pub fn add(&mut self, exporter: usize, importer: usize, weight: f64) {
        *self
            .edges
            .entry((exporter as u32, importer as u32))
            .or_insert(0.0) += weight;
    }

    pub fn remove(&mut self, exporter: usize, importer: usize) -> Option<f64> {
        self.edges.remove(&(exporter as u32, importer as u32))
    }

    pub fn get(&self, exporter: usize, importer: usize) -> f64 {
        self.edges
            .get(&(exporter as u32, importer as u32))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn contains_edge(&self, exporter: usize, importer: usize) -> bool {
        self.edges.contains_key(&(exporter as u32, importer as u32))
    }

    /// Deterministic iteration over `(exporter, importer, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges
            .iter()
            .map(|(&(i, j), &w)| (i as usize, j as usize, w))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Sum of incoming weights per node.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (_, j, w) in self.edges() {
            sums[j] += w;
        }
        sums
    }

    /// Sum of outgoing weights per node.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (i, _, w) in self.edges() {
            sums[i] += w;
        }
        sums
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for (i, _, _) in self.edges() {
            deg[i] += 1;
        }
        deg
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for (_, j, _) in self.edges() {
            deg[j] += 1;
        }
        deg
    }

    /// Returns a layer with the same edges rescaled/transformed by `f`.
    pub fn map_weights(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Layer {
        let mut out = Layer::new(self.n);
        for (i, j, w) in self.edges() {
            out.insert(i, j, f(i, j, w));
        }
        out
    }

    /// Keeps only edges for which the predicate holds.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Layer {
        let mut out = Layer::new(self.n);
        for (i, j, w) in self.edges() {
            if keep(i, j, w) {
                out.insert(i, j, w);
            }
        }
        out
    }
}

/// resource id -> year -> layer
pub type LayerMap = BTreeMap<String, BTreeMap<i32, Layer>>;

/// Time-indexed multiplex of bilateral trade flows, in a USD value layer and
/// a kg mass layer sharing one country index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeFlowPanel {
    pub countries: CountryRegistry,
    pub resources: ResourceRegistry,
    pub years: Vec<i32>,
    pub value_usd: LayerMap,
    pub mass_kg: LayerMap,
}

impl TradeFlowPanel {
    pub fn empty(countries: CountryRegistry, resources: ResourceRegistry, years: Vec<i32>) -> Self {
        TradeFlowPanel {
            countries,
            resources,
            years,
            value_usd: BTreeMap::new(),
            mass_kg: BTreeMap::new(),
        }
    }

    pub fn value_layer(&self, resource: &str, year: i32) -> Option<&Layer> {
        self.value_usd.get(&normalize_id(resource))?.get(&year)
    }

    pub fn mass_layer(&self, resource: &str, year: i32) -> Option<&Layer> {
        self.mass_kg.get(&normalize_id(resource))?.get(&year)
    }

    /// Years for which a value layer of `resource` exists, in order.
    pub fn years_with_layer(&self, resource: &str) -> Vec<i32> {
        self.value_usd
            .get(&normalize_id(resource))
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Rebuilds registry indices after deserialization.
    pub fn reindex(&mut self) {
        self.countries.reindex();
        self.resources.reindex();
    }
}

/// Kinds of panel invariant violations reported by [`validate_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    NegativeWeight,
    SelfLoop,
    NodeIndexOutOfRange,
    MassWithoutValueLayer,
    MassWithoutValueFlow,
    PsOutOfRange,
    RgiOutOfRange,
    NegativeReserves,
    ImportRelianceOutOfRange,
    NegativeTradeBarrier,
    UnknownResourceKey,
}

/// One invariant failure with its location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub resource: Option<String>,
    pub year: Option<i32>,
    pub exporter: Option<usize>,
    pub importer: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

fn flow_violation(
    kind: ViolationKind,
    resource: &str,
    year: i32,
    i: usize,
    j: usize,
    detail: String,
) -> Violation {
    Violation {
        kind,
        resource: Some(resource.to_string()),
        year: Some(year),
        exporter: Some(i),
        importer: Some(j),
        detail,
    }
}

/// Diagnostic check of every panel invariant. Returns an empty list iff all
/// invariants hold; never errors.
pub fn validate_panel(panel: &TradeFlowPanel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = panel.countries.len();

    let mut check_layers = |layers: &LayerMap, which: &str| {
        for (resource, by_year) in layers {
            if !panel.resources.contains(resource) {
                out.push(Violation {
                    kind: ViolationKind::UnknownResourceKey,
                    resource: Some(resource.clone()),
                    year: None,
                    exporter: None,
                    importer: None,
                    detail: format!("{which} layer keyed by unregistered resource `{resource}`"),
                });
            }
            for (&year, layer) in by_year {
                for (i, j, w) in layer.edges() {
                    if w < 0.0 {
                        out.push(flow_violation(
                            ViolationKind::NegativeWeight,
                            resource,
                            year,
                            i,
                            j,
                            format!("{which} flow ({resource}, {year}, {i}, {j}) has weight {w}"),
                        ));
                    }
                    if i == j {
                        out.push(flow_violation(
                            ViolationKind::SelfLoop,
                            resource,
                            year,
                            i,
                            j,
                            format!("{which} self-loop at ({resource}, {year}, {i})"),
                        ));
                    }
                    if i >= n || j >= n {
                        out.push(flow_violation(
                            ViolationKind::NodeIndexOutOfRange,
                            resource,
                            year,
                            i,
                            j,
                            format!(
                                "{which} flow ({resource}, {year}, {i}, {j}) outside index space of {n} countries"
                            ),
                        ));
                    }
                }
            }
        }
    };
    check_layers(&panel.value_usd, "value");
    check_layers(&panel.mass_kg, "mass");

    // mass may be absent for a flow, never present without a value flow
    for (resource, by_year) in &panel.mass_kg {
        for (&year, mass) in by_year {
            match panel.value_layer(resource, year) {
                None => out.push(Violation {
                    kind: ViolationKind::MassWithoutValueLayer,
                    resource: Some(resource.clone()),
                    year: Some(year),
                    exporter: None,
                    importer: None,
                    detail: format!("mass layer ({resource}, {year}) has no value layer"),
                }),
                Some(value) => {
                    for (i, j, _) in mass.edges() {
                        if !value.contains_edge(i, j) {
                            out.push(flow_violation(
                                ViolationKind::MassWithoutValueFlow,
                                resource,
                                year,
                                i,
                                j,
                                format!(
                                    "mass flow ({resource}, {year}, {i}, {j}) has no value flow"
                                ),
                            ));
                        }
                    }
                }
            }
        }
    }

    for rec in panel.countries.iter() {
        for (&year, &ps) in &rec.ps_by_year {
            if !(0.0..=100.0).contains(&ps) {
                out.push(Violation {
                    kind: ViolationKind::PsOutOfRange,
                    resource: None,
                    year: Some(year),
                    exporter: None,
                    importer: None,
                    detail: format!("country {} has PS {ps} in year {year}", rec.id),
                });
            }
        }
        if let Some(rgi) = rec.rgi {
            if !(0.0..=100.0).contains(&rgi) {
                out.push(Violation {
                    kind: ViolationKind::RgiOutOfRange,
                    resource: None,
                    year: None,
                    exporter: None,
                    importer: None,
                    detail: format!("country {} has RGI {rgi}", rec.id),
                });
            }
        }
    }

    for rec in panel.resources.iter() {
        if let Some(r) = rec.reserves_kg {
            if r < 0.0 {
                out.push(Violation {
                    kind: ViolationKind::NegativeReserves,
                    resource: Some(rec.id.clone()),
                    year: None,
                    exporter: None,
                    importer: None,
                    detail: format!("resource {} has reserves {r}", rec.id),
                });
            }
        }
        for (region, &ir) in &rec.import_reliance {
            if !(0.0..=1.0).contains(&ir) {
                out.push(Violation {
                    kind: ViolationKind::ImportRelianceOutOfRange,
                    resource: Some(rec.id.clone()),
                    year: None,
                    exporter: None,
                    importer: None,
                    detail: format!("resource {} has IR {ir} for region {region}", rec.id),
                });
            }
        }
        for (region, &tb) in &rec.trade_barriers {
            if tb < 0.0 {
                out.push(Violation {
                    kind: ViolationKind::NegativeTradeBarrier,
                    resource: Some(rec.id.clone()),
                    year: None,
                    exporter: None,
                    importer: None,
                    detail: format!("resource {} has TB {tb} for region {region}", rec.id),
                });
            }
        }
    }

    out
}

/// Per-resource, per-year vulnerability network: import shares scaled by
/// exporter political instability, entries in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityNetwork {
    pub resource: String,
    pub year: i32,
    pub weights: Layer,
}

impl VulnerabilityNetwork {
    /// Boolean adjacency: edge present exactly where the weight is positive.
    pub fn adjacency(&self) -> Layer {
        self.weights.filter_edges(|_, _, w| w > 0.0).map_weights(|_, _, _| 1.0)
    }
}

/// Per-resource global metrics (time-averaged over the layer's years).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalIndicators {
    pub avg_degree: Option<f64>,
    pub lambda: Option<f64>,
    pub scc_fraction: Option<f64>,
    pub scarcity: Option<f64>,
    pub total_trade_volume_kg: Option<f64>,
    pub csr: Option<f64>,
}

/// Per-(resource, region) indicators, time-averaged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionalIndicators {
    pub pagerank: Option<f64>,
    pub in_strength: Option<f64>,
    pub in_degree: Option<f64>,
    pub traderisk: Option<f64>,
    pub instrength_traderisk: Option<f64>,
    pub import_reliance: Option<f64>,
    pub volatility: Option<f64>,
    pub trade_barrier: Option<f64>,
}

/// Full indicator table: global rows per resource, regional rows per
/// (resource, region).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTable {
    /// resource -> global indicators
    pub global: BTreeMap<String, GlobalIndicators>,
    /// resource -> region -> regional indicators
    pub regional: BTreeMap<String, BTreeMap<String, RegionalIndicators>>,
}

impl IndicatorTable {
    pub fn regions(&self) -> BTreeSet<String> {
        self.regional
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect()
    }
}

/// One row of a correlation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub x_name: String,
    pub y_name: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub controlling_for: Option<String>,
    pub partial_rho: Option<f64>,
    pub partial_p: Option<f64>,
    /// Set when the entry could not be computed (too few observations,
    /// zero variance, degenerate control).
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub entries: Vec<CorrelationEntry>,
}

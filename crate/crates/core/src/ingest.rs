//! CSV ingestion: country and resource registries, raw bilateral trade
//! records, reporter/partner reconciliation, share thresholding, and
//! condensation of a country group into a single node.
//!
//! # File formats
//!
//! `countries.csv` — one row per country and year:
//! `id,year,ps,rgi,region_tags` where `rgi` may be empty and `region_tags`
//! is a semicolon-separated list (may be empty).
//!
//! `resources.csv` — one row per resource:
//! `id,reserves_kg,sr_nrc,sr_bgs,sr_ec,...,classification` plus any number
//! of `ir_<REGION>` (import reliance) and `tb_<REGION>` (trade barrier)
//! columns. Empty cells mean "not available".
//!
//! `trade.csv` — one row per reported flow:
//! `year,reporter,partner,resource,direction,value_usd,mass_kg` where
//! `direction` is `export` (reporter is the exporter) or `import`
//! (reporter is the importer) and `mass_kg` may be empty.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    normalize_id, CountryRecord, CountryRegistry, Layer, ResourceRecord, ResourceRegistry,
    TradeFlowPanel,
};

/// Which side of a bilateral flow reported the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Export,
    Import,
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "export" => Ok(Direction::Export),
            "import" => Ok(Direction::Import),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// One reported flow, oriented exporter -> importer regardless of which
/// side reported it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTradeRecord {
    pub year: i32,
    pub exporter: String,
    pub importer: String,
    pub resource: String,
    pub direction: Direction,
    pub value_usd: f64,
    pub mass_kg: Option<f64>,
}

fn parse_f64(field: &str, name: &str, line: u64) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
        msg: format!("cannot parse `{}` as number for {name}", field.trim()),
        line: Some(line),
    })
}

fn parse_opt_f64(field: &str, name: &str, line: u64) -> Result<Option<f64>> {
    let t = field.trim();
    if t.is_empty() {
        Ok(None)
    } else {
        parse_f64(t, name, line).map(Some)
    }
}

fn parse_i32(field: &str, name: &str, line: u64) -> Result<i32> {
    field.trim().parse::<i32>().map_err(|_| Error::MalformedRow {
        msg: format!("cannot parse `{}` as integer for {name}", field.trim()),
        line: Some(line),
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Csv {
            file: path.display().to_string(),
            source: e,
        })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        file: path.display().to_string(),
        source: e,
    }
}

/// Parses `countries.csv`. Rows for the same country accumulate stability
/// scores by year; a conflicting duplicate (same country, same year,
/// different score) is an error.
pub fn parse_countries_csv(path: &Path) -> Result<CountryRegistry> {
    let mut reader = open_csv(path)?;
    let mut records: BTreeMap<String, CountryRecord> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 5 {
            return Err(Error::MalformedRow {
                msg: format!("expected 5 fields, found {}", row.len()),
                line: Some(line),
            });
        }
        let id = normalize_id(&row[0]);
        if id.is_empty() {
            return Err(Error::MalformedRow {
                msg: "empty country id".into(),
                line: Some(line),
            });
        }
        let year = parse_i32(&row[1], "year", line)?;
        let ps = parse_opt_f64(&row[2], "ps", line)?;
        let rgi = parse_opt_f64(&row[3], "rgi", line)?;
        let entry = records
            .entry(id.clone())
            .or_insert_with(|| CountryRecord::new(&id));
        if let Some(ps) = ps {
            if let Some(&prev) = entry.ps_by_year.get(&year) {
                if prev != ps {
                    return Err(Error::MalformedRow {
                        msg: format!("conflicting stability score for {id} in {year}"),
                        line: Some(line),
                    });
                }
            }
            entry.ps_by_year.insert(year, ps);
        }
        if let Some(rgi) = rgi {
            if entry.rgi.is_some_and(|prev| prev != rgi) {
                return Err(Error::MalformedRow {
                    msg: format!("conflicting governance score for {id}"),
                    line: Some(line),
                });
            }
            entry.rgi = Some(rgi);
        }
        for tag in row[4].split(';') {
            let tag = tag.trim();
            if !tag.is_empty() {
                entry.region_tags.insert(normalize_id(tag));
            }
        }
    }
    CountryRegistry::new(records.into_values().collect())
}

/// Parses `resources.csv`. `ir_*`/`tb_*` columns are detected from the
/// header; any other unknown column is an error.
pub fn parse_resources_csv(path: &Path) -> Result<ResourceRegistry> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    enum Col {
        Id,
        Reserves,
        SrNrc,
        SrBgs,
        SrEc,
        Classification,
        Ir(String),
        Tb(String),
    }
    let mut cols = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        let h = h.trim();
        let col = match h.to_ascii_lowercase().as_str() {
            "id" => Col::Id,
            "reserves_kg" => Col::Reserves,
            "sr_nrc" => Col::SrNrc,
            "sr_bgs" => Col::SrBgs,
            "sr_ec" => Col::SrEc,
            "classification" => Col::Classification,
            lower if lower.starts_with("ir_") => Col::Ir(normalize_id(&h[3..])),
            lower if lower.starts_with("tb_") => Col::Tb(normalize_id(&h[3..])),
            other => {
                return Err(Error::MalformedRow {
                    msg: format!("unknown column `{other}` in resources file"),
                    line: Some(1),
                })
            }
        };
        cols.push(col);
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != cols.len() {
            return Err(Error::MalformedRow {
                msg: format!("expected {} fields, found {}", cols.len(), row.len()),
                line: Some(line),
            });
        }
        let mut rec = ResourceRecord::new("PENDING");
        let mut saw_id = false;
        for (col, field) in cols.iter().zip(row.iter()) {
            match col {
                Col::Id => {
                    let id = normalize_id(field);
                    if id.is_empty() {
                        return Err(Error::MalformedRow {
                            msg: "empty resource id".into(),
                            line: Some(line),
                        });
                    }
                    rec.id = id;
                    saw_id = true;
                }
                Col::Reserves => rec.reserves_kg = parse_opt_f64(field, "reserves_kg", line)?,
                Col::SrNrc => rec.sr_nrc = parse_opt_f64(field, "sr_nrc", line)?,
                Col::SrBgs => rec.sr_bgs = parse_opt_f64(field, "sr_bgs", line)?,
                Col::SrEc => rec.sr_ec = parse_opt_f64(field, "sr_ec", line)?,
                Col::Classification => {
                    let t = field.trim();
                    if !t.is_empty() {
                        rec.classification =
                            Some(serde_json::from_value(serde_json::Value::String(
                                t.to_ascii_lowercase(),
                            ))
                            .map_err(|_| Error::MalformedRow {
                                msg: format!("unknown classification `{t}`"),
                                line: Some(line),
                            })?);
                    }
                }
                Col::Ir(region) => {
                    if let Some(v) = parse_opt_f64(field, "import reliance", line)? {
                        rec.import_reliance.insert(region.clone(), v);
                    }
                }
                Col::Tb(region) => {
                    if let Some(v) = parse_opt_f64(field, "trade barrier", line)? {
                        rec.trade_barriers.insert(region.clone(), v);
                    }
                }
            }
        }
        if !saw_id {
            return Err(Error::MalformedRow {
                msg: "resources file has no `id` column".into(),
                line: Some(1),
            });
        }
        records.push(rec);
    }
    ResourceRegistry::new(records)
}

/// Parses `trade.csv` into raw records, validating country/resource ids
/// against the registries and years against the configured range.
pub fn parse_trade_csv(
    path: &Path,
    countries: &CountryRegistry,
    resources: &ResourceRegistry,
    years: &[i32],
) -> Result<Vec<RawTradeRecord>> {
    let (min_year, max_year) = match (years.iter().min(), years.iter().max()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (i32::MIN, i32::MAX),
    };
    let mut reader = open_csv(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 7 {
            return Err(Error::MalformedRow {
                msg: format!("expected 7 fields, found {}", row.len()),
                line: Some(line),
            });
        }
        let year = parse_i32(&row[0], "year", line)?;
        if year < min_year || year > max_year {
            return Err(Error::YearOutOfRange {
                year,
                min: min_year,
                max: max_year,
                line: Some(line),
            });
        }
        let reporter = normalize_id(&row[1]);
        let partner = normalize_id(&row[2]);
        let resource = normalize_id(&row[3]);
        for id in [&reporter, &partner] {
            if countries.index_of(id).is_none() {
                return Err(Error::UnknownCountry {
                    id: id.clone(),
                    line: Some(line),
                });
            }
        }
        if !resources.contains(&resource) {
            return Err(Error::UnknownResource {
                id: resource,
                line: Some(line),
            });
        }
        if reporter == partner {
            return Err(Error::MalformedRow {
                msg: format!("self-flow for {reporter}"),
                line: Some(line),
            });
        }
        let direction: Direction = row[4].parse().map_err(|msg| Error::MalformedRow {
            msg,
            line: Some(line),
        })?;
        let value_usd = parse_f64(&row[5], "value_usd", line)?;
        let mass_kg = parse_opt_f64(&row[6], "mass_kg", line)?;
        if value_usd < 0.0 || mass_kg.is_some_and(|m| m < 0.0) {
            return Err(Error::MalformedRow {
                msg: "negative value or mass".into(),
                line: Some(line),
            });
        }
        let (exporter, importer) = match direction {
            Direction::Export => (reporter, partner),
            Direction::Import => (partner, reporter),
        };
        out.push(RawTradeRecord {
            year,
            exporter,
            importer,
            resource,
            direction,
            value_usd,
            mass_kg,
        });
    }
    Ok(out)
}

/// Reconciles exporter- and importer-reported records into one panel.
///
/// For each (resource, year, exporter, importer) cell the reconciled value
/// is the maximum of the two reported values, a missing side counting as
/// zero; the mass is taken from the side whose value won (export side on
/// ties). Two records for the same cell and the same direction are an
/// error. Cells with zero reconciled value are dropped.
pub fn reconcile(
    records: &[RawTradeRecord],
    countries: CountryRegistry,
    resources: ResourceRegistry,
    years: Vec<i32>,
) -> Result<TradeFlowPanel> {
    type Cell = (f64, Option<f64>);
    // (resource, year) -> (exporter, importer) -> [export-side, import-side]
    let mut cells: BTreeMap<(String, i32), BTreeMap<(u32, u32), [Option<Cell>; 2]>> =
        BTreeMap::new();
    for rec in records {
        let e = countries
            .index_of(&rec.exporter)
            .ok_or_else(|| Error::UnknownCountry {
                id: rec.exporter.clone(),
                line: None,
            })? as u32;
        let i = countries
            .index_of(&rec.importer)
            .ok_or_else(|| Error::UnknownCountry {
                id: rec.importer.clone(),
                line: None,
            })? as u32;
        let slot = match rec.direction {
            Direction::Export => 0,
            Direction::Import => 1,
        };
        let sides = cells
            .entry((rec.resource.clone(), rec.year))
            .or_default()
            .entry((e, i))
            .or_insert([None, None]);
        if sides[slot].is_some() {
            return Err(Error::DuplicateRecord {
                direction: format!("{:?}", rec.direction).to_lowercase(),
                exporter: rec.exporter.clone(),
                importer: rec.importer.clone(),
                resource: rec.resource.clone(),
                year: rec.year,
            });
        }
        sides[slot] = Some((rec.value_usd, rec.mass_kg));
    }

    let n = countries.len();
    let mut panel = TradeFlowPanel::empty(countries, resources, years);
    for ((resource, year), edges) in cells {
        let mut value = Layer::new(n);
        let mut mass = Layer::new(n);
        for ((e, i), sides) in edges {
            let export_side = sides[0].unwrap_or((0.0, None));
            let import_side = sides[1].unwrap_or((0.0, None));
            let (v, m) = if export_side.0 >= import_side.0 {
                export_side
            } else {
                import_side
            };
            if v > 0.0 {
                value.insert(e as usize, i as usize, v);
                if let Some(m) = m.filter(|&m| m > 0.0) {
                    mass.insert(e as usize, i as usize, m);
                }
            }
        }
        if !value.is_empty() {
            panel
                .value_usd
                .entry(resource.clone())
                .or_default()
                .insert(year, value);
            if !mass.is_empty() {
                panel.mass_kg.entry(resource).or_default().insert(year, mass);
            }
        }
    }
    Ok(panel)
}

/// Drops flows whose share of the importer's total (per resource, year and
/// importer, computed before any dropping) does not exceed `theta`.
/// Mass flows follow the decision made on the corresponding value flow.
/// Applying the filter twice gives the same panel as applying it once,
/// because removals only increase the shares of the surviving flows.
pub fn apply_threshold(panel: &TradeFlowPanel, theta: f64) -> TradeFlowPanel {
    assert!((0.0..1.0).contains(&theta), "threshold must be in [0,1)");
    let mut out = panel.clone();
    out.value_usd.clear();
    out.mass_kg.clear();
    for (resource, by_year) in &panel.value_usd {
        for (&year, layer) in by_year {
            let totals = layer.column_sums();
            let kept = layer.filter_edges(|_, j, w| totals[j] > 0.0 && w / totals[j] > theta);
            if !kept.is_empty() {
                let mass = panel.mass_layer(resource, year).map(|m| {
                    m.filter_edges(|i, j, _| kept.contains_edge(i, j))
                });
                out.value_usd
                    .entry(resource.clone())
                    .or_default()
                    .insert(year, kept);
                if let Some(mass) = mass.filter(|m| !m.is_empty()) {
                    out.mass_kg
                        .entry(resource.clone())
                        .or_default()
                        .insert(year, mass);
                }
            }
        }
    }
    out
}

/// Merges all countries carrying `member_tag` into a single node `region_id`.
///
/// Flows internal to the group are deleted; flows between the group and the
/// rest are summed. The condensed node's stability score in each year is the
/// import-value-weighted mean of the members' scores (unweighted when no
/// member imports anything that year); its governance score is the
/// unweighted mean of the members' available scores.
pub fn condense_region(
    panel: &TradeFlowPanel,
    member_tag: &str,
    region_id: &str,
) -> Result<TradeFlowPanel> {
    let member_tag = normalize_id(member_tag);
    let region_id = normalize_id(region_id);
    let members = panel.countries.with_tag(&member_tag);
    if members.is_empty() {
        return Err(Error::EmptyRegion(member_tag));
    }
    if panel.countries.index_of(&region_id).is_some() {
        return Err(Error::NodeIdCollision(region_id));
    }
    let is_member: Vec<bool> = {
        let mut v = vec![false; panel.countries.len()];
        for &m in &members {
            v[m] = true;
        }
        v
    };

    // total import value of each member per year, used as PS weights
    let mut import_weight: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for by_year in panel.value_usd.values() {
        for (&year, layer) in by_year {
            let w = import_weight
                .entry(year)
                .or_insert_with(|| vec![0.0; panel.countries.len()]);
            for (_, j, weight) in layer.edges() {
                if is_member[j] {
                    w[j] += weight;
                }
            }
        }
    }

    // new registry: survivors in id order plus the condensed node
    let mut records: Vec<CountryRecord> = panel
        .countries
        .iter()
        .enumerate()
        .filter(|(i, _)| !is_member[*i])
        .map(|(_, r)| r.clone())
        .collect();
    let mut region = CountryRecord::new(&region_id);
    region.region_tags.insert(member_tag.clone());
    let years: Vec<i32> = {
        let mut ys: std::collections::BTreeSet<i32> = panel.years.iter().copied().collect();
        ys.extend(import_weight.keys().copied());
        ys.into_iter().collect()
    };
    for &year in &years {
        let weights = import_weight.get(&year);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for &m in &members {
            if let Some((ps, _)) = panel.countries.get(m).ps_nearest(year) {
                let w = weights.map_or(0.0, |w| w[m]);
                num += w * ps;
                den += w;
                sum += ps;
                cnt += 1;
            }
        }
        if cnt > 0 {
            let ps = if den > 0.0 { num / den } else { sum / cnt as f64 };
            region.ps_by_year.insert(year, ps);
        }
    }
    let rgis: Vec<f64> = members
        .iter()
        .filter_map(|&m| panel.countries.get(m).rgi)
        .collect();
    if !rgis.is_empty() {
        region.rgi = Some(rgis.iter().sum::<f64>() / rgis.len() as f64);
    }
    records.push(region);
    let countries = CountryRegistry::new(records)?;

    // old index -> new index (members all map to the condensed node)
    let region_idx = countries.index_of(&region_id).expect("just inserted");
    let remap: Vec<usize> = (0..panel.countries.len())
        .map(|i| {
            if is_member[i] {
                region_idx
            } else {
                countries
                    .index_of(panel.countries.get(i).id.as_str())
                    .expect("survivor retained")
            }
        })
        .collect();

    let n = countries.len();
    let condense_map = |layers: &BTreeMap<String, BTreeMap<i32, Layer>>| {
        let mut out: BTreeMap<String, BTreeMap<i32, Layer>> = BTreeMap::new();
        for (resource, by_year) in layers {
            for (&year, layer) in by_year {
                let mut new_layer = Layer::new(n);
                for (i, j, w) in layer.edges() {
                    let (ni, nj) = (remap[i], remap[j]);
                    if ni != nj {
                        new_layer.add(ni, nj, w);
                    }
                }
                if !new_layer.is_empty() {
                    out.entry(resource.clone()).or_default().insert(year, new_layer);
                }
            }
        }
        out
    };

    Ok(TradeFlowPanel {
        countries,
        resources: panel.resources.clone(),
        years: panel.years.clone(),
        value_usd: condense_map(&panel.value_usd),
        mass_kg: condense_map(&panel.mass_kg),
    })
}

/// Loads the three CSV files from a directory and reconciles them into a
/// panel (no thresholding, no condensation).
pub fn load_dir(dir: &Path, years: &[i32]) -> Result<TradeFlowPanel> {
    let countries = parse_countries_csv(&dir.join("countries.csv"))?;
    let resources = parse_resources_csv(&dir.join("resources.csv"))?;
    let records = parse_trade_csv(&dir.join("trade.csv"), &countries, &resources, years)?;
    reconcile(&records, countries, resources, years.to_vec())
}

//! Pearson correlation with Student-t significance, linear partial
//! correlation, and the report machinery that turns an indicator table into
//! correlation tables with significance stars.
//!
//! The t distribution is evaluated through the regularized incomplete beta
//! function with continued-fraction evaluation (tolerance 1e-12).

use serde::{Deserialize, Serialize};

use crate::model::{CorrelationEntry, CorrelationReport, IndicatorTable};

/// Natural log of the gamma function (Lanczos approximation, g=7, n=9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = 0.99999999999980993;
        for (i, &c) in COEFFS.iter().enumerate() {
            acc += c / (x + (i + 1) as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

const BETA_TOL: f64 = 1e-12;
const BETA_MAX_ITER: usize = 500;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta_reg requires positive parameters");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a t statistic with `dof` degrees of freedom:
/// `P(|T| >= |t|) = I_{dof/(dof + t^2)}(dof/2, 1/2)`.
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
}

/// Why a correlation could not be computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} complete observations, have {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("zero variance in `{0}`")]
    ZeroVariance(String),
    #[error("control variable is perfectly collinear with `{0}`")]
    DegenerateControl(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

fn pearson_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("x".into()));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("y".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation with a two-sided p-value from
/// `t = rho * sqrt((n-2)/(1-rho^2))` under Student-t with n-2 dof.
/// `|rho| = 1` yields p = 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    assert_eq!(x.len(), y.len(), "series lengths must match");
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: n });
    }
    let rho = pearson_rho(x, y)?;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let dof = (n - 2) as f64;
        let t = rho * (dof / (1.0 - rho * rho)).sqrt();
        t_two_sided_p(t, dof)
    };
    Ok(Correlation { rho, p_value, n })
}

/// Linear partial correlation of x and y controlling for z:
/// `rho_xy.z = (rho_xy - rho_xz*rho_yz) / sqrt((1-rho_xz^2)(1-rho_yz^2))`,
/// p-value from t with n-3 dof.
pub fn partial_pearson(x: &[f64], y: &[f64], z: &[f64]) -> Result<Correlation, StatsError> {
    assert!(x.len() == y.len() && y.len() == z.len(), "series lengths must match");
    let n = x.len();
    if n < 4 {
        return Err(StatsError::TooFewObservations { needed: 4, got: n });
    }
    let rho_xy = pearson_rho(x, y)?;
    let rho_xz = pearson_rho(x, z).map_err(|_| StatsError::ZeroVariance("z".into()))?;
    let rho_yz = pearson_rho(y, z).map_err(|_| StatsError::ZeroVariance("z".into()))?;
    let denom = ((1.0 - rho_xz * rho_xz) * (1.0 - rho_yz * rho_yz)).sqrt();
    if rho_xz.abs() >= 1.0 {
        return Err(StatsError::DegenerateControl("x".into()));
    }
    if rho_yz.abs() >= 1.0 {
        return Err(StatsError::DegenerateControl("y".into()));
    }
    let rho = ((rho_xy - rho_xz * rho_yz) / denom).clamp(-1.0, 1.0);
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let dof = (n - 3) as f64;
        let t = rho * (dof / (1.0 - rho * rho)).sqrt();
        t_two_sided_p(t, dof)
    };
    Ok(Correlation { rho, p_value, n })
}

/// Significance stars: `p < 0.05` -> `*`, `p < 0.01` -> `**`,
/// `p < 0.001` -> `***`. Derived presentation only, never used in logic.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// A column of the indicator table, selectable for correlation analyses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variable {
    Global(GlobalVar),
    Regional { region: String, var: RegionalVar },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalVar {
    AvgDegree,
    Lambda,
    SccFraction,
    Scarcity,
    TotalTradeVolume,
    Csr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionalVar {
    PageRank,
    InStrength,
    InDegree,
    TradeRisk,
    InStrengthTradeRisk,
    ImportReliance,
    Volatility,
    TradeBarrier,
}

impl Variable {
    pub fn name(&self) -> String {
        match self {
            Variable::Global(v) => format!("{v:?}"),
            Variable::Regional { region, var } => format!("{var:?}_{region}"),
        }
    }

    fn extract(&self, table: &IndicatorTable, resource: &str) -> Option<f64> {
        match self {
            Variable::Global(v) => {
                let g = table.global.get(resource)?;
                match v {
                    GlobalVar::AvgDegree => g.avg_degree,
                    GlobalVar::Lambda => g.lambda,
                    GlobalVar::SccFraction => g.scc_fraction,
                    GlobalVar::Scarcity => g.scarcity,
                    GlobalVar::TotalTradeVolume => g.total_trade_volume_kg,
                    GlobalVar::Csr => g.csr,
                }
            }
            Variable::Regional { region, var } => {
                let r = table.regional.get(resource)?.get(region)?;
                match var {
                    RegionalVar::PageRank => r.pagerank,
                    RegionalVar::InStrength => r.in_strength,
                    RegionalVar::InDegree => r.in_degree,
                    RegionalVar::TradeRisk => r.traderisk,
                    RegionalVar::InStrengthTradeRisk => r.instrength_traderisk,
                    RegionalVar::ImportReliance => r.import_reliance,
                    RegionalVar::Volatility => r.volatility,
                    RegionalVar::TradeBarrier => r.trade_barrier,
                }
            }
        }
    }
}

/// One requested correlation: x against y, optionally controlling for a
/// third variable (partial correlation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub x: Variable,
    pub y: Variable,
    pub control: Option<Variable>,
}

/// Extracts paired (or triple-complete) series over resources with pairwise
/// deletion of missing values and evaluates every spec item. Unavailable
/// entries are recorded with a note; the suite never aborts.
pub fn correlation_suite(table: &IndicatorTable, specs: &[CorrelationSpec]) -> CorrelationReport {
    let resources: Vec<&String> = table.global.keys().collect();
    let mut entries = Vec::new();
    for spec in specs {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut zs = Vec::new();
        for r in &resources {
            let x = spec.x.extract(table, r);
            let y = spec.y.extract(table, r);
            match &spec.control {
                None => {
                    if let (Some(x), Some(y)) = (x, y) {
                        xs.push(x);
                        ys.push(y);
                    }
                }
                Some(c) => {
                    if let (Some(x), Some(y), Some(z)) = (x, y, c.extract(table, r)) {
                        xs.push(x);
                        ys.push(y);
                        zs.push(z);
                    }
                }
            }
        }

        let mut entry = CorrelationEntry {
            x_name: spec.x.name(),
            y_name: spec.y.name(),
            n: xs.len(),
            rho: None,
            p_value: None,
            controlling_for: spec.control.as_ref().map(Variable::name),
            partial_rho: None,
            partial_p: None,
            note: None,
        };
        match pearson(&xs, &ys) {
            Ok(c) => {
                entry.rho = Some(c.rho);
                entry.p_value = Some(c.p_value);
            }
            Err(e) => entry.note = Some(e.to_string()),
        }
        if spec.control.is_some() {
            match partial_pearson(&xs, &ys, &zs) {
                Ok(c) => {
                    entry.partial_rho = Some(c.rho);
                    entry.partial_p = Some(c.p_value);
                }
                Err(e) => {
                    let note = entry.note.take().map(|n| n + "; ").unwrap_or_default();
                    entry.note = Some(format!("{note}partial: {e}"));
                }
            }
        }
        entries.push(entry);
    }
    CorrelationReport { entries }
}

/// The default report layout: global network metrics against supply risk,
/// scarcity and trade volume, then per region the four risk indicators
/// against price volatility and trade barriers, plus the partial
/// correlation of TradeRisk with volatility controlling for the
/// In-Strength TradeRisk.
pub fn default_suite(regions: &[String]) -> Vec<CorrelationSpec> {
    let mut specs = Vec::new();
    for x in [GlobalVar::Lambda, GlobalVar::SccFraction] {
        for y in [GlobalVar::Csr, GlobalVar::Scarcity, GlobalVar::TotalTradeVolume] {
            specs.push(CorrelationSpec {
                x: Variable::Global(x),
                y: Variable::Global(y),
                control: None,
            });
        }
    }
    for region in regions {
        for x in [
            RegionalVar::TradeRisk,
            RegionalVar::ImportReliance,
            RegionalVar::PageRank,
            RegionalVar::InStrengthTradeRisk,
        ] {
            for y in [RegionalVar::Volatility, RegionalVar::TradeBarrier] {
                specs.push(CorrelationSpec {
                    x: Variable::Regional {
                        region: region.clone(),
                        var: x,
                    },
                    y: Variable::Regional {
                        region: region.clone(),
                        var: y,
                    },
                    control: None,
                });
            }
        }
        specs.push(CorrelationSpec {
            x: Variable::Regional {
                region: region.clone(),
                var: RegionalVar::TradeRisk,
            },
            y: Variable::Regional {
                region: region.clone(),
                var: RegionalVar::Volatility,
            },
            control: Some(Variable::Regional {
                region: region.clone(),
                var: RegionalVar::InStrengthTradeRisk,
            }),
        });
    }
    specs
}

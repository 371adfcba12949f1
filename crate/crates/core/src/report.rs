//! Running an algorithm on one target and the serializable report shape.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::control::{
    brute_force_domain, check_sc, check_wc, shrink_and_split, Check, ControlDomain, Guarantee, SnsConfig,
};
use crate::formula::{Affine, SymbolicState, TargetSpec};
use crate::metrics::{
    self, band, builtin_weights, BandCutoffs, BaseWeight, MetricsError, Recipe, ScoredParam, Weight,
};
use crate::newsome::{density_domain, newsome_domain, DensityInterval, NewsomeConfig};
use crate::solver::{SolverConfig, SolverError, SolverStats};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sns,
    Snsfb,
    Newsome,
    Brute,
    Wc,
    Sc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Sns, Algorithm::Snsfb, Algorithm::Newsome, Algorithm::Brute, Algorithm::Wc, Algorithm::Sc];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sns => "sns",
            Algorithm::Snsfb => "snsfb",
            Algorithm::Newsome => "newsome",
            Algorithm::Brute => "brute",
            Algorithm::Wc => "wc",
            Algorithm::Sc => "sc",
        }
    }

    /// Whether the algorithm produces a domain (as opposed to a verdict).
    pub fn yields_domain(self) -> bool {
        !matches!(self, Algorithm::Wc | Algorithm::Sc)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected sns, snsfb, newsome, brute, wc or sc)"))
    }
}

/// Everything that shapes one analysis besides the input.
#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    pub split_limit: u64,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { split_limit: crate::control::DEFAULT_SPLIT_LIMIT, solver: SolverConfig::internal(), seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeScore {
    pub recipe: Recipe,
    pub weight: String,
    pub score: f64,
    pub band: metrics::Band,
    pub cutoffs: BandCutoffs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(with = "crate::serde_num::u128_str")]
    pub count: u128,
    pub qc: f64,
    pub qc_bits: f64,
    /// Interval-form wQC per built-in weight, density-scaled when the
    /// domain carries fixed bits or sampled densities.
    pub wqc: BTreeMap<String, f64>,
    /// The target scored as the size of an out-of-bounds write.
    pub oob_write: RecipeScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub name: String,
    pub expr: String,
    pub width: u32,
    pub transform: Option<Affine>,
    pub algorithm: Algorithm,
    pub domain: Option<ControlDomain>,
    pub density: Option<Vec<DensityInterval>>,
    pub wc: Check,
    pub sc: Check,
    pub scores: Option<ScoreReport>,
    pub exact: bool,
    #[serde(with = "crate::serde_num::opt_u64_str", default)]
    pub concrete: Option<u64>,
    pub solver: SolverStats,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo { name: "ctrldom".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputInfo {
    Fixture { name: String, sink: String, input: BTreeMap<String, String> },
    Smt2 { path: String, sha256: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigInfo {
    pub algorithm: Algorithm,
    pub split_limit: u64,
    pub solver: String,
    pub solver_command: Option<String>,
    pub timeout_ms: u64,
    pub budget_bits: u32,
    #[serde(with = "crate::serde_num::u64_str")]
    pub seed: u64,
    pub newsome: Option<NewsomeConfig>,
}

/// Non-reproducible facts about a run, kept apart from the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub timestamp: String,
    pub wall_ms: f64,
    pub solver_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub tool: ToolInfo,
    pub input: InputInfo,
    pub config: ConfigInfo,
    pub targets: Vec<TargetReport>,
    pub run: RunInfo,
}

impl AnalysisReport {
    pub fn exact(&self) -> bool {
        self.targets.iter().all(|t| t.exact)
    }
}

/// Per-interval value counts for density-scaled metrics: fixed bits,
/// sampled densities, or nothing (all values assumed present).
fn densities(domain: &ControlDomain, density: Option<&[DensityInterval]>) -> Option<Vec<f64>> {
    if let Some(d) = density {
        return Some(d.iter().map(|i| i.estimated_count()).collect());
    }
    domain.fixed_bits.map(|_| metrics::fixed_bits_density(domain))
}

fn scored_wqc(
    domain: &ControlDomain,
    weight: &Weight,
    transform: Option<&Affine>,
    rho: Option<&[f64]>,
) -> Result<f64, MetricsError> {
    match rho {
        Some(r) => metrics::wqc_constrained(domain, weight, transform, r),
        None => metrics::wqc_interval(domain, weight, transform),
    }
}

/// wQC of a domain, scaled by sampled densities when given and by its
/// fixed bits otherwise.
pub fn density_wqc(
    domain: &ControlDomain,
    weight: &Weight,
    transform: Option<&Affine>,
    density: Option<&[DensityInterval]>,
) -> Result<f64, MetricsError> {
    scored_wqc(domain, weight, transform, densities(domain, density).as_deref())
}

pub fn score_report(
    domain: &ControlDomain,
    transform: Option<&Affine>,
    density: Option<&[DensityInterval]>,
) -> Result<ScoreReport, MetricsError> {
    let rho = densities(domain, density);
    let mut wqc = BTreeMap::new();
    for w in builtin_weights() {
        wqc.insert(w.name(), scored_wqc(domain, &w, transform, rho.as_deref())?);
    }
    let log = Weight::Base(BaseWeight::Log);
    let score = match density {
        Some(_) => scored_wqc(domain, &log, transform, rho.as_deref())? * domain.width as f64,
        None => metrics::score_oob(None, Some(ScoredParam { domain, transform: transform.copied() }), &log)?,
    };
    let cutoffs = Recipe::OobWrite.default_cutoffs();
    Ok(ScoreReport {
        count: domain.count(),
        qc: metrics::qc(domain),
        qc_bits: metrics::qc_bits(domain),
        wqc,
        oob_write: RecipeScore {
            recipe: Recipe::OobWrite,
            weight: log.name(),
            score,
            band: band(score, cutoffs),
            cutoffs,
        },
    })
}

/// Runs `algorithm` on one target; returns the report and the wall time.
pub fn analyze_target(
    name: &str,
    state: &SymbolicState,
    target: &TargetSpec,
    algorithm: Algorithm,
    options: &AnalysisOptions,
) -> Result<(TargetReport, Duration), SolverError> {
    let started = Instant::now();
    let mut solver = options.solver.open()?;
    let mut density = None;
    let domain = match algorithm {
        Algorithm::Sns => Some(shrink_and_split(&mut solver, state, target, &SnsConfig::with_split_limit(options.split_limit))?),
        Algorithm::Snsfb => Some(shrink_and_split(
            &mut solver,
            state,
            target,
            &SnsConfig { split_limit: options.split_limit, use_fixed_bits: true },
        )?),
        Algorithm::Newsome => {
            let d = newsome_domain(&mut solver, state, target, &NewsomeConfig::with_seed(options.seed))?;
            let dom = density_domain(target.width, &d);
            density = Some(d);
            Some(dom)
        }
        Algorithm::Brute => Some(brute_force_domain(state, target, options.solver.budget_bits)?),
        Algorithm::Wc | Algorithm::Sc => None,
    };
    let wc = check_wc(&mut solver, state, &target.expr)?;
    let sc = check_sc(&mut solver, state, target)?;
    let exact = match (&domain, algorithm) {
        (Some(d), Algorithm::Newsome) => d.is_empty(),
        (Some(d), _) => d.exact,
        (None, Algorithm::Wc) => wc.as_bool().is_some(),
        (None, _) => sc.as_bool().is_some(),
    };
    let scores = match &domain {
        Some(d) => Some(score_report(d, target.transform.as_ref(), density.as_deref()).map_err(|e| SolverError::Config(e.to_string()))?),
        None => None,
    };
    let report = TargetReport {
        name: name.to_string(),
        expr: target.expr.to_string(),
        width: target.width,
        transform: target.transform,
        algorithm,
        domain,
        density,
        wc,
        sc,
        scores,
        exact,
        concrete: None,
        solver: solver.stats().clone(),
    };
    Ok((report, started.elapsed()))
}

/// One row of plot data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub target: String,
    pub lo: u64,
    pub hi: u64,
    pub guarantee: Guarantee,
    /// Fraction of the interval holding feasible values, when known.
    pub density: Option<f64>,
}

/// Interval rows of every target's domain, sorted by target then `lo`.
pub fn plot_rows(report: &AnalysisReport) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for t in &report.targets {
        let Some(d) = &t.domain else { continue };
        for (k, iv) in d.intervals.iter().enumerate() {
            let density = match (&t.density, d.fixed_bits, iv.guarantee) {
                (Some(dens), _, _) => dens.get(k).map(|x| x.density_estimate),
                (None, Some(_), _) => Some(d.interval_count(iv) as f64 / iv.len() as f64),
                (None, None, Guarantee::Strong) => Some(1.0),
                (None, None, Guarantee::Weak) => None,
            };
            rows.push(PlotRow { target: t.name.clone(), lo: iv.lo, hi: iv.hi, guarantee: iv.guarantee, density });
        }
    }
    rows.sort_by(|a, b| (&a.target, a.lo).cmp(&(&b.target, b.lo)));
    rows
}

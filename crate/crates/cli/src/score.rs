use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use ctrldom::control::ControlDomain;
use ctrldom::formula::Affine;
use ctrldom::metrics::{self, band, Band, BandCutoffs, Recipe, ScoredParam, Weight};
use ctrldom::newsome::DensityInterval;
use ctrldom::report::{density_wqc, AnalysisReport, SCHEMA_VERSION};
use serde::Serialize;

use crate::input::emit;

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// oob-write, oob-read, cfh or data.
    #[arg(long)]
    pub recipe: String,
    /// Weight name, e.g. `log`, `inverse-square` or `distance:16,256:log`
    /// [default: log for oob, cfh-valid for cfh].
    #[arg(long, conflicts_with = "weight_file")]
    pub weight: Option<String>,
    /// Piecewise weight as JSON.
    #[arg(long, value_name = "FILE")]
    pub weight_file: Option<PathBuf>,
    /// Domain of the written/read size (oob recipes).
    #[arg(long, value_name = "FILE")]
    pub size: Option<PathBuf>,
    /// Domain of the access offset (oob recipes).
    #[arg(long, value_name = "FILE")]
    pub offset: Option<PathBuf>,
    /// Domain of the overwritten code pointer (cfh).
    #[arg(long, value_name = "FILE")]
    pub target: Option<PathBuf>,
    /// Domain of one written byte (data); repeat up to eight times.
    #[arg(long, value_name = "FILE")]
    pub byte: Vec<PathBuf>,
    /// Shift of the size into offset coordinates, replacing the file's.
    #[arg(long, allow_hyphen_values = true)]
    pub size_shift: Option<i128>,
    /// Shift of the offset, replacing the file's.
    #[arg(long, allow_hyphen_values = true)]
    pub offset_shift: Option<i128>,
    /// Band cutoffs as `MEDIUM,HIGH`.
    #[arg(long, value_name = "M,H")]
    pub cutoffs: Option<String>,
    /// Target to take from a multi-target report [default: the first with a domain].
    #[arg(long)]
    pub target_name: Option<String>,
    /// Output path [default: stdout].
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// A domain read from a report or a bare domain file.
pub struct Param {
    pub source: String,
    pub domain: ControlDomain,
    pub transform: Option<Affine>,
    pub density: Option<Vec<DensityInterval>>,
}

pub fn load_param(path: &Path, target_name: Option<&str>) -> Result<Param> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
    let source = path.display().to_string();
    if value.get("targets").is_some() {
        let report: AnalysisReport = serde_json::from_value(value)
            .with_context(|| format!("{} is not an analysis report", path.display()))?;
        let t = report
            .targets
            .into_iter()
            .find(|t| t.domain.is_some() && target_name.is_none_or(|n| n == t.name))
            .ok_or_else(|| anyhow!("{}: no matching target with a domain", path.display()))?;
        return Ok(Param { source, domain: t.domain.expect("filtered"), transform: t.transform, density: t.density });
    }
    let domain: ControlDomain =
        serde_json::from_value(value).with_context(|| format!("{} is not a domain", path.display()))?;
    domain.validate().with_context(|| path.display().to_string())?;
    Ok(Param { source, domain, transform: None, density: None })
}

#[derive(Debug, Serialize)]
pub struct Component {
    pub role: String,
    pub source: String,
    pub width: u32,
    pub count: String,
    pub qc: f64,
    pub qc_bits: f64,
    /// Weighted control under the recipe's weight; absent for `data`.
    pub wqc: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ScoreOutput {
    pub schema_version: String,
    pub recipe: Recipe,
    pub weight: Option<String>,
    pub score: f64,
    pub band: Band,
    pub cutoffs: BandCutoffs,
    pub components: Vec<Component>,
}

fn parse_cutoffs(s: &str) -> Result<BandCutoffs> {
    let (m, h) = s.split_once(',').ok_or_else(|| anyhow!("cutoffs must be `MEDIUM,HIGH`"))?;
    let c = BandCutoffs { medium: m.trim().parse()?, high: h.trim().parse()? };
    if !(c.medium <= c.high) {
        bail!("medium cutoff {} exceeds high cutoff {}", c.medium, c.high);
    }
    Ok(c)
}

fn component(role: &str, p: &Param, wqc: Option<f64>) -> Component {
    Component {
        role: role.into(),
        source: p.source.clone(),
        width: p.domain.width,
        count: p.domain.count().to_string(),
        qc: metrics::qc(&p.domain),
        qc_bits: metrics::qc_bits(&p.domain),
        wqc,
    }
}

fn scored(p: &Option<Param>) -> Option<ScoredParam<'_>> {
    p.as_ref().map(|p| ScoredParam { domain: &p.domain, transform: p.transform })
}

fn param_wqc(p: &Param, weight: &Weight) -> Result<f64> {
    Ok(density_wqc(&p.domain, weight, p.transform.as_ref(), p.density.as_deref())?)
}

pub fn score(args: &ScoreArgs) -> Result<ScoreOutput> {
    let recipe: Recipe = args.recipe.parse()?;
    let weight = match (&args.weight, &args.weight_file) {
        (Some(w), _) => Some(w.parse::<Weight>()?),
        (None, Some(f)) => {
            let text = std::fs::read_to_string(f).with_context(|| format!("cannot read {}", f.display()))?;
            Some(Weight::from_json(&text)?)
        }
        (None, None) => None,
    };
    let load = |p: &Option<PathBuf>| p.as_deref().map(|p| load_param(p, args.target_name.as_deref())).transpose();
    let cutoffs = args.cutoffs.as_deref().map(parse_cutoffs).transpose()?.unwrap_or(recipe.default_cutoffs());
    let misplaced = |what: &str| anyhow!("{what} does not apply to the {recipe} recipe");
    let (score, weight, components) = match recipe {
        Recipe::OobWrite | Recipe::OobRead => {
            if args.target.is_some() || !args.byte.is_empty() {
                return Err(misplaced("--target/--byte"));
            }
            let weight = weight.unwrap_or(Weight::Base(metrics::BaseWeight::Log));
            let mut size = load(&args.size)?;
            let mut offset = load(&args.offset)?;
            if let (Some(p), Some(s)) = (size.as_mut(), args.size_shift) {
                p.transform = Some(Affine::shift(s));
            }
            if let (Some(p), Some(s)) = (offset.as_mut(), args.offset_shift) {
                p.transform = Some(Affine::shift(s));
            }
            let sampled = size.iter().chain(&offset).any(|p| p.density.is_some());
            let score = if sampled {
                let width = size.iter().chain(&offset).map(|p| p.domain.width).max().unwrap_or(0);
                if size.iter().chain(&offset).any(|p| p.domain.width != width) {
                    bail!("size and offset widths differ");
                }
                let mut sum = 0.0;
                for p in size.iter().chain(&offset) {
                    sum += param_wqc(p, &weight)?;
                }
                sum * width as f64
            } else {
                metrics::score_oob(scored(&offset), scored(&size), &weight)?
            };
            let mut comps = Vec::new();
            for (role, p) in [("size", &size), ("offset", &offset)] {
                if let Some(p) = p {
                    comps.push(component(role, p, Some(param_wqc(p, &weight)?)));
                }
            }
            (score, Some(weight.name()), comps)
        }
        Recipe::Cfh => {
            if args.size.is_some() || args.offset.is_some() || !args.byte.is_empty() {
                return Err(misplaced("--size/--offset/--byte"));
            }
            let p = load(&args.target)?.ok_or_else(|| anyhow!("the cfh recipe needs --target"))?;
            let (score, weight) = match weight {
                Some(w) => (param_wqc(&p, &w)?, w),
                None if p.density.is_none() => {
                    (metrics::score_cfh(&p.domain)?, Weight::Base(metrics::BaseWeight::CfhValid))
                }
                None => {
                    let w = Weight::Base(metrics::BaseWeight::CfhValid);
                    (param_wqc(&p, &w)?, w)
                }
            };
            (score, Some(weight.name()), vec![component("target", &p, Some(score))])
        }
        Recipe::Data => {
            if args.size.is_some() || args.offset.is_some() || args.target.is_some() {
                return Err(misplaced("--size/--offset/--target"));
            }
            if weight.is_some() {
                return Err(misplaced("a weight"));
            }
            let params = args
                .byte
                .iter()
                .map(|p| load_param(p, args.target_name.as_deref()))
                .collect::<Result<Vec<_>>>()?;
            let domains: Vec<&ControlDomain> = params.iter().map(|p| &p.domain).collect();
            let score = metrics::score_data(&domains)?;
            (score, None, params.iter().map(|p| component("byte", p, None)).collect())
        }
    };
    Ok(ScoreOutput {
        schema_version: SCHEMA_VERSION.into(),
        recipe,
        weight,
        score,
        band: band(score, cutoffs),
        cutoffs,
        components,
    })
}

pub fn run(args: &ScoreArgs) -> Result<u8> {
    let out = score(args)?;
    let mut json = serde_json::to_string_pretty(&out)?;
    json.push('\n');
    emit(args.out.as_deref(), &json)?;
    Ok(0)
}

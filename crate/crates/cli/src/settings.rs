//! Resolved `fuse` settings: flags, then the optional key=value file, then
//! built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::ValueEnum;
use expofuse::compensate::DEFAULT_TARGET_GRAY;
use expofuse::filters::{DEFAULT_SIGMA_RANGE, DEFAULT_SIGMA_SPATIAL};
use expofuse::{PyramidLevels, DEFAULT_EPSILON};

use crate::{Blend, Depth, FuseArgs, Gamut, UsageError, Weights};

const KEYS: &[&str] = &[
    "weights",
    "blend",
    "levels",
    "no-adjust",
    "sigma-spatial",
    "sigma-range",
    "epsilon",
    "target-gray",
    "srgb",
    "exact-bilateral",
    "threads",
    "gamut",
    "bit-depth",
];

#[derive(Clone, Debug, PartialEq)]
pub struct FuseSettings {
    pub weights: Weights,
    pub blend: Blend,
    pub levels: PyramidLevels,
    pub adjust: bool,
    pub sigma_spatial: f64,
    pub sigma_range: f64,
    pub epsilon: f64,
    pub target_gray: f64,
    pub srgb: bool,
    pub exact_bilateral: bool,
    pub threads: Option<usize>,
    pub gamut: Gamut,
    pub bit_depth: Depth,
}

/// Parses `key = value` lines. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key=value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(UsageError(format!("config line {}: unknown key `{key}`", n + 1)).into());
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn parse_levels(s: &str) -> Result<PyramidLevels> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(PyramidLevels::Auto);
    }
    s.parse::<usize>()
        .map(PyramidLevels::Fixed)
        .map_err(|_| UsageError(format!("levels must be a number or `auto`, got `{s}`")).into())
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(UsageError(format!("{key}: expected a boolean, got `{s}`")).into()),
    }
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| UsageError(format!("{key}: cannot parse `{s}`")).into())
}

fn parse_enum<E: ValueEnum>(key: &str, s: &str) -> Result<E> {
    E::from_str(s, true).map_err(|_| UsageError(format!("{key}: unknown value `{s}`")).into())
}

impl FuseSettings {
    pub fn resolve(args: &FuseArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => load_config(path)?,
            None => BTreeMap::new(),
        };
        let cfg = |key: &str| file.get(key).map(String::as_str);

        let levels = match (args.levels.as_deref(), cfg("levels")) {
            (Some(s), _) | (None, Some(s)) => parse_levels(s)?,
            (None, None) => PyramidLevels::Auto,
        };
        let flag_or = |set: bool, key: &str| -> Result<bool> {
            if set {
                return Ok(true);
            }
            cfg(key).map_or(Ok(false), |v| parse_bool(key, v))
        };
        let srgb = if args.linear {
            false
        } else if args.assume_srgb {
            true
        } else {
            cfg("srgb").map_or(Ok(true), |v| parse_bool("srgb", v))?
        };

        macro_rules! pick {
            ($flag:expr, $key:literal, $parse:ident, $default:expr) => {
                match $flag {
                    Some(v) => v,
                    None => match cfg($key) {
                        Some(s) => $parse($key, s)?,
                        None => $default,
                    },
                }
            };
        }

        let settings = FuseSettings {
            weights: pick!(args.weights, "weights", parse_enum, Weights::Simple),
            blend: pick!(args.blend, "blend", parse_enum, Blend::Naive),
            levels,
            adjust: !flag_or(args.no_adjust, "no-adjust")?,
            sigma_spatial: pick!(
                args.sigma_spatial,
                "sigma-spatial",
                parse_num,
                DEFAULT_SIGMA_SPATIAL
            ),
            sigma_range: pick!(
                args.sigma_range,
                "sigma-range",
                parse_num,
                DEFAULT_SIGMA_RANGE
            ),
            epsilon: pick!(args.epsilon, "epsilon", parse_num, DEFAULT_EPSILON),
            target_gray: pick!(
                args.target_gray,
                "target-gray",
                parse_num,
                DEFAULT_TARGET_GRAY
            ),
            srgb,
            exact_bilateral: flag_or(args.exact_bilateral, "exact-bilateral")?,
            threads: match args.threads {
                Some(n) => Some(n),
                None => cfg("threads")
                    .map(|s| parse_num("threads", s))
                    .transpose()?,
            },
            gamut: pick!(args.gamut, "gamut", parse_enum, Gamut::Warn),
            bit_depth: pick!(args.bit_depth, "bit-depth", parse_enum, Depth::Eight),
        };
        settings.check()?;
        Ok(settings)
    }

    fn check(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(UsageError(format!("{name} must be positive, got {v}")))
            }
        };
        positive("sigma-spatial", self.sigma_spatial)?;
        positive("sigma-range", self.sigma_range)?;
        positive("epsilon", self.epsilon)?;
        positive("target-gray", self.target_gray)?;
        if self.threads == Some(0) {
            return Err(UsageError("threads must be >= 1".into()).into());
        }
        Ok(())
    }
}

fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

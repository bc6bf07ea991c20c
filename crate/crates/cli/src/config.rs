//! Flat TOML configuration merged with command-line flags. Flags win.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, ValueEnum};
use mobius_core::{FormulaSettings, PrecisionPolicy};
use serde::{Deserialize, Deserializer, Serialize};

use crate::Usage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Every setting that can come from the config file or a flag.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knobs {
    /// Character label `q.e1.e2...` (exponents on the fixed generators of (Z/q)^*).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub character: Option<String>,

    /// Modulus of the progression.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus: Option<u64>,

    /// Residue class of the progression.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<u64>,

    /// Field: Q, Qi, Qsqrt5, Qzeta<m>, gen:<label>[,<label>...] or a descriptor file.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,

    /// Comma separated list of x values.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,

    /// Truncation height T.
    #[arg(long = "t", short = 'T', global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,

    /// Sieve limit.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<u64>,

    /// `lo:hi:step` for the sigma axis of lgrid.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_range: Option<String>,

    /// `lo:hi:step` for the t axis of lgrid.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_range: Option<String>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Sigma step of the good-ordinate grid.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_step: Option<f64>,

    /// T step of the good-ordinate grid.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_step: Option<f64>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_relative_error: Option<f64>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub euler_maclaurin_order: Option<u32>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_scale: Option<f64>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_base: Option<f64>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

impl Knobs {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
        let knobs: Knobs = toml::from_str(&text).map_err(|e| Usage(format!("config {}: {e}", path.display())))?;
        Ok(knobs)
    }

    /// `self` (flags) over `file`.
    pub fn over(self, file: Knobs) -> Knobs {
        Knobs {
            character: self.character.or(file.character),
            modulus: self.modulus.or(file.modulus),
            a: self.a.or(file.a),
            field: self.field.or(file.field),
            x: self.x.or(file.x),
            t: self.t.or(file.t),
            limit: self.limit.or(file.limit),
            sigma_range: self.sigma_range.or(file.sigma_range),
            t_range: self.t_range.or(file.t_range),
            cache_dir: self.cache_dir.or(file.cache_dir),
            format: self.format.or(file.format),
            out: self.out.or(file.out),
            sigma_step: self.sigma_step.or(file.sigma_step),
            t_step: self.t_step.or(file.t_step),
            target_relative_error: self.target_relative_error.or(file.target_relative_error),
            euler_maclaurin_order: self.euler_maclaurin_order.or(file.euler_maclaurin_order),
            cutoff_scale: self.cutoff_scale.or(file.cutoff_scale),
            cutoff_base: self.cutoff_base.or(file.cutoff_base),
        }
    }
}

/// Resolved configuration, embedded verbatim in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_file: Option<PathBuf>,
    #[serde(flatten)]
    pub knobs: Knobs,
}

impl RunConfig {
    pub fn resolve(command: &str, config_file: Option<PathBuf>, flags: Knobs, default_format: Format) -> Result<Self> {
        let file = match &config_file {
            Some(p) => Knobs::from_file(p)?,
            None => Knobs::default(),
        };
        let mut knobs = flags.over(file);
        let policy = PrecisionPolicy::default();
        let settings = FormulaSettings::default();
        knobs.cache_dir.get_or_insert_with(|| PathBuf::from("caches"));
        knobs.format.get_or_insert(default_format);
        knobs.sigma_step.get_or_insert(settings.sigma_step);
        knobs.t_step.get_or_insert(settings.t_step);
        knobs.target_relative_error.get_or_insert(policy.target_relative_error);
        knobs.euler_maclaurin_order.get_or_insert(policy.euler_maclaurin_order);
        knobs.cutoff_scale.get_or_insert(policy.cutoff_scale);
        knobs.cutoff_base.get_or_insert(policy.cutoff_base);
        let cfg = RunConfig { command: command.to_string(), config_file, knobs };
        cfg.settings()?;
        Ok(cfg)
    }

    pub fn policy(&self) -> PrecisionPolicy {
        let k = &self.knobs;
        let d = PrecisionPolicy::default();
        PrecisionPolicy {
            target_relative_error: k.target_relative_error.unwrap_or(d.target_relative_error),
            euler_maclaurin_order: k.euler_maclaurin_order.unwrap_or(d.euler_maclaurin_order),
            cutoff_scale: k.cutoff_scale.unwrap_or(d.cutoff_scale),
            cutoff_base: k.cutoff_base.unwrap_or(d.cutoff_base),
        }
    }

    pub fn settings(&self) -> Result<FormulaSettings> {
        let policy = self.policy();
        policy.validate().map_err(|e| Usage(e.to_string()))?;
        let d = FormulaSettings::default();
        let s = FormulaSettings {
            policy,
            sigma_step: self.knobs.sigma_step.unwrap_or(d.sigma_step),
            t_step: self.knobs.t_step.unwrap_or(d.t_step),
        };
        if !(s.sigma_step > 0.0 && s.t_step > 0.0) {
            return Err(Usage("grid steps must be positive".into()).into());
        }
        Ok(s)
    }

    pub fn format(&self) -> Format {
        self.knobs.format.unwrap_or(Format::Json)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.knobs.cache_dir.clone().unwrap_or_else(|| PathBuf::from("caches"))
    }

    pub fn height(&self) -> Result<f64> {
        match self.knobs.t {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(Usage(format!("T must be positive, got {t}")).into()),
            None => Err(Usage("missing --t".into()).into()),
        }
    }

    pub fn xs(&self) -> Result<Vec<f64>> {
        let xs = self.knobs.x.clone().ok_or_else(|| Usage("missing --x".into()))?;
        if xs.is_empty() || xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Usage("x values must be positive".into()).into());
        }
        Ok(xs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
pub fn parse_range(spec: &str, name: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Usage(format!("{name} must look like lo:hi:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad().into());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let (lo, hi, step) = (v[0], v[1], v[2]);
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad().into());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(Usage(format!("{name} has more than a million points")).into());
    }
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

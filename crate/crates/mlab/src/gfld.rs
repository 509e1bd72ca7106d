//! `GFLD 1 <n_theta> <n_z>` text fields and their JSON sidecars.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mlab_core::energy::Model;
use mlab_core::minimize::MinimizeResult;
use mlab_core::pattern::{Family, PatternParams};
use mlab_core::{Configuration, Domain, EnergyReport, GridField, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "mlab/1";

/// Writes values with 17 significant digits, one θ-row per line.
pub fn to_string(f: &GridField) -> String {
    let d = f.domain;
    let mut s = format!("GFLD 1 {} {}\n", d.n_theta, d.n_z);
    for row in f.values.chunks(d.n_z) {
        let mut first = true;
        for v in row {
            if !first {
                s.push(' ');
            }
            first = false;
            write!(s, "{v:.16e}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Parses a field; `domain` supplies the extents, which the format omits.
pub fn parse(text: &str, domain: Option<Domain>) -> CliResult<GridField> {
    let mut tokens = text.split_whitespace();
    let bad = |m: &str| CliError::Precondition(format!("malformed GFLD field: {m}"));
    if tokens.next() != Some("GFLD") || tokens.next() != Some("1") {
        return Err(bad("expected header `GFLD 1 <n_theta> <n_z>`"));
    }
    let mut dim =
        || -> CliResult<usize> { tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad grid size")) };
    let (nt, nz) = (dim()?, dim()?);
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad value {t:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    if values.len() != nt * nz {
        return Err(bad(&format!("{} values for a {nt}x{nz} grid", values.len())));
    }
    let dom = match domain {
        Some(d) if d.n_theta == nt && d.n_z == nz => d,
        Some(d) => return Err(bad(&format!("grid {nt}x{nz} disagrees with sidecar {}x{}", d.n_theta, d.n_z))),
        None => Domain::new(nt, nz)?,
    };
    Ok(GridField::new(dom, values)?)
}

/// Everything besides the field values needed to rebuild a configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: String,
    pub model: Model,
    /// Energy family the field was produced for.
    pub family: Family,
    pub params: ModelParams,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternParams>,
    /// Slope bound the construction guarantees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EnergyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<MinimizeResult>,
}

impl Sidecar {
    pub fn new(family: Family, c: &Configuration) -> Self {
        Self {
            schema: SCHEMA.into(),
            model: c.model,
            family,
            params: c.params,
            domain: c.domain(),
            pattern: None,
            slope_bound: None,
            report: None,
            result: None,
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn component_paths(prefix: &Path) -> [PathBuf; 3] {
    ["rho", "theta", "z"].map(|c| with_suffix(prefix, &format!(".{c}.gfld")))
}

pub fn sidecar_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".json")
}

/// Writes `<prefix>.{rho,theta,z}.gfld` and `<prefix>.json`.
pub fn save(prefix: &Path, c: &Configuration, meta: &Sidecar) -> CliResult<()> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    for (path, f) in component_paths(prefix).iter().zip([&c.comp_rho, &c.comp_theta, &c.comp_z]) {
        fs::write(path, to_string(f))?;
    }
    fs::write(sidecar_path(prefix), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn load(prefix: &Path) -> CliResult<(Configuration, Sidecar)> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| CliError::Precondition(format!("{}: {e}", p.display())));
    let meta: Sidecar = serde_json::from_str(&read(&sidecar_path(prefix))?)?;
    if meta.schema != SCHEMA {
        return Err(CliError::Precondition(format!("unsupported schema {:?}", meta.schema)));
    }
    let [r, t, z] = component_paths(prefix);
    let f = |p: &Path| parse(&read(p)?, Some(meta.domain));
    let params = ModelParams::new(meta.params.h, meta.params.lambda, meta.params.rho, meta.params.m)?;
    let c = Configuration::new(meta.model, f(&r)?, f(&t)?, f(&z)?, params)?;
    Ok((c, meta))
}

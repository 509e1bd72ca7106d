//! Parameter sweeps over log-spaced values of one parameter.

use std::io::Write;

use mlab_core::certificates::all_certificates;
use mlab_core::energy::energy;
use mlab_core::minimize::{minimize, MinimizeOptions};
use mlab_core::oracle::predict;
use mlab_core::pattern::{
    candidate_params, m1, m2, select_regime_params, Family, PatternBuilder, PatternParams, Regime,
};
use mlab_core::{Configuration, Domain, ModelParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, CliResult};

/// Grids larger than this are evaluated with the reduced one-dimensional integrals.
pub const MAX_GRID_POINTS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Varying {
    H,
    Lambda,
    #[value(name = "rho_minus_1")]
    RhoMinus1,
    M,
}

impl Varying {
    pub fn name(self) -> &'static str {
        match self {
            Varying::H => "h",
            Varying::Lambda => "lambda",
            Varying::RhoMinus1 => "rho_minus_1",
            Varying::M => "m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SweepMode {
    Construct,
    Minimize,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub model: Family,
    pub varying: Varying,
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    /// Values of the parameters that do not vary; the varying one is overwritten.
    pub fixed: ModelParams,
    pub mode: SweepMode,
    /// Follow this construction branch instead of the predicted one.
    pub regime: Option<Regime>,
    /// Grid nodes per wrinkle for constructed patterns.
    pub samples: usize,
    /// Grid for minimization runs.
    pub grid: (usize, usize),
    pub minimize: MinimizeOptions,
    pub skip_failures: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.count < 4 {
            return Err(CliError::Precondition(format!("a sweep needs at least 4 points, got {}", self.count)));
        }
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi.is_finite()) {
            return Err(CliError::Precondition(format!("need 0 < lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.samples < 2 {
            return Err(CliError::Precondition("samples per wrinkle must be at least 2".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let r = (self.hi / self.lo).ln();
        (0..self.count)
            .map(
                |i| {
                    if i + 1 == self.count {
                        self.hi
                    } else {
                        self.lo * (r * i as f64 / (self.count - 1) as f64).exp()
                    }
                },
            )
            .collect()
    }

    pub fn point(&self, v: f64) -> CliResult<ModelParams> {
        let p = self.fixed;
        let (h, lambda, rho, m) = match self.varying {
            Varying::H => (v, p.lambda, p.rho, p.m),
            Varying::Lambda => (p.h, v, p.rho, p.m),
            Varying::RhoMinus1 => (p.h, p.lambda, 1.0 + v, p.m),
            Varying::M => (p.h, p.lambda, p.rho, v),
        };
        Ok(ModelParams::new(h, lambda, rho, m)?)
    }
}

fn inf_as_text<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub model: &'static str,
    pub mode: &'static str,
    pub value: f64,
    pub h: f64,
    pub lambda: f64,
    pub rho: f64,
    #[serde(serialize_with = "inf_as_text")]
    pub m: f64,
    pub regime: Option<&'static str>,
    pub n: Option<u32>,
    pub k: Option<u32>,
    pub delta: Option<f64>,
    /// "grid", "reduced" or "minimize".
    pub evaluator: Option<&'static str>,
    pub n_theta: Option<usize>,
    pub n_z: Option<usize>,
    pub excess: Option<f64>,
    pub slope_linf: Option<f64>,
    pub oracle_branch: &'static str,
    pub oracle_value: f64,
    pub certificates_passed: Option<usize>,
    pub certificates_total: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

impl SweepRow {
    fn blank(index: usize, spec: &SweepSpec, value: f64, mp: &ModelParams) -> Self {
        let pred = predict(spec.model, mp);
        Self {
            index,
            model: spec.model.name(),
            mode: match spec.mode {
                SweepMode::Construct => "CONSTRUCT",
                SweepMode::Minimize => "MINIMIZE",
            },
            value,
            h: mp.h,
            lambda: mp.lambda,
            rho: mp.rho,
            m: mp.m,
            regime: None,
            n: None,
            k: None,
            delta: None,
            evaluator: None,
            n_theta: None,
            n_z: None,
            excess: None,
            slope_linf: None,
            oracle_branch: pred.branch.name(),
            oracle_value: pred.value,
            certificates_passed: None,
            certificates_total: None,
            converged: None,
            error: None,
        }
    }

    pub fn certificates_failed(&self) -> bool {
        matches!((self.certificates_passed, self.certificates_total), (Some(p), Some(t)) if p < t)
    }
}

/// Cheapest construction of the requested branch, or the predicted one.
pub fn branch_params(family: Family, mp: &ModelParams, regime: Option<Regime>) -> CliResult<PatternParams> {
    let Some(regime) = regime else {
        return Ok(select_regime_params(family, mp)?);
    };
    let b = PatternBuilder::default();
    candidate_params(family, mp)
        .into_iter()
        .filter(|p| p.regime == regime)
        .filter_map(|p| b.reduced_excess(family, mp, &p).ok().map(|e| (e, p)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
        .ok_or_else(|| CliError::Precondition(format!("no admissible {} construction at {mp:?}", regime.name())))
}

fn certify(row: &mut SweepRow, c: &Configuration) -> CliResult<()> {
    let certs = all_certificates(c)?;
    row.certificates_total = Some(certs.len());
    row.certificates_passed = Some(certs.iter().filter(|r| r.passed).count());
    Ok(())
}

fn construct(row: &mut SweepRow, spec: &SweepSpec, mp: &ModelParams) -> CliResult<()> {
    let pp = branch_params(spec.model, mp, spec.regime)?;
    row.regime = Some(pp.regime.name());
    row.n = Some(pp.n);
    row.k = Some(pp.k);
    row.delta = Some(pp.delta);
    let b = PatternBuilder::default();
    let dom = b.resolving_domain(spec.model, &pp, spec.samples)?;
    if dom.len() > MAX_GRID_POINTS {
        row.evaluator = Some("reduced");
        row.excess = Some(b.reduced_excess(spec.model, mp, &pp)?);
        if pp.regime != Regime::Unbuckled {
            row.slope_linf = Some(match spec.model {
                Family::Fs => m2(pp.delta, pp.n, pp.k, mp.lambda),
                Family::Vkd => m1(mp.lambda, pp.delta),
                Family::Nl => 1.0,
            });
        }
        return Ok(());
    }
    row.evaluator = Some("grid");
    row.n_theta = Some(dom.n_theta);
    row.n_z = Some(dom.n_z);
    let c = b.build(spec.model, mp, &pp, dom)?;
    let rep = energy(&c, spec.model == Family::Fs)?;
    row.excess = Some(rep.excess);
    row.slope_linf = Some(rep.slope_linf);
    certify(row, &c)
}

fn minimized(row: &mut SweepRow, spec: &SweepSpec, mp: &ModelParams) -> CliResult<()> {
    let dom = Domain::new(spec.grid.0, spec.grid.1)?;
    row.evaluator = Some("minimize");
    row.n_theta = Some(dom.n_theta);
    row.n_z = Some(dom.n_z);
    let r = minimize(spec.model, mp, dom, &spec.minimize)?;
    row.excess = Some(r.report.excess);
    row.slope_linf = Some(r.slope_linf);
    row.converged = Some(r.converged);
    certify(row, r.configuration())
}

fn run_point(index: usize, spec: &SweepSpec, value: f64) -> CliResult<SweepRow> {
    let mp = spec.point(value)?;
    let mut row = SweepRow::blank(index, spec, value, &mp);
    let out = match spec.mode {
        SweepMode::Construct => construct(&mut row, spec, &mp),
        SweepMode::Minimize => minimized(&mut row, spec, &mp),
    };
    match out {
        Ok(()) => Ok(row),
        Err(e) if spec.skip_failures => {
            row.error = Some(e.to_string());
            Ok(row)
        }
        Err(e) => Err(e),
    }
}

/// Runs every point on the worker pool; rows come back in point order.
/// Without `skip_failures` the first failing point (in order) aborts.
pub fn run_sweep(spec: &SweepSpec) -> CliResult<Vec<SweepRow>> {
    spec.validate()?;
    let values = spec.values();
    let results: Vec<CliResult<SweepRow>> =
        values.par_iter().enumerate().map(|(i, v)| run_point(i, spec, *v)).collect();
    results.into_iter().collect()
}

pub const CSV_HEADER_COMMENT: &str = "# mlab/1 sweep";

pub fn write_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> CliResult<()> {
    writeln!(w, "{CSV_HEADER_COMMENT}")?;
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}

/// Reads two numeric columns from a sweep CSV, skipping rows where either
/// cell is empty (failed points).
pub fn read_columns(text: &str, x: &str, y: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Precondition(format!("no column {name:?}")))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (vec![], vec![]);
    for rec in rd.records() {
        let rec = rec?;
        let (a, b) = (rec.get(ix).unwrap_or(""), rec.get(iy).unwrap_or(""));
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| CliError::Precondition(format!("not a number: {s:?}")));
        xs.push(num(a)?);
        ys.push(num(b)?);
    }
    Ok((xs, ys))
}

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlab_core::certificates::{all_certificates, interpolation_ratio, interpolation_sample, summarize, InterpFamily};
use mlab_core::energy::energy;
use mlab_core::minimize::{minimize, minimize_from, Initial, MinimizeOptions, ObstacleMode};
use mlab_core::oracle::{predict, regime_boundary};
use mlab_core::pattern::{m1, m2, select_regime_params, Family, PatternBuilder, PatternParams, Regime};
use mlab_core::{Domain, ModelParams};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::fit::fit_exponent;
use crate::gfld::{self, Sidecar};
use crate::sweep::{self, run_sweep, SweepMode, SweepSpec, Varying};

#[derive(Debug, Parser)]
#[command(name = "mlab", version, about = "Wrinkling energies of a compressed cylinder on a mandrel")]
pub struct Cli {
    /// Directory for output files; without it results go to stdout.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Table format for sweep, certify and interp output.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for sweeps and sample suites.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// key = value file mirroring the flags; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Vkd,
    Nl,
    Fs,
}

impl From<ModelArg> for Family {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Vkd => Family::Vkd,
            ModelArg::Nl => Family::Nl,
            ModelArg::Fs => Family::Fs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Noise,
    Pattern,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObstacleArg {
    Projection,
    Penalty,
}

fn parse_slope(s: &str) -> Result<f64, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| format!("not a number or \"inf\": {s}")),
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) =
        s.to_ascii_lowercase().split_once('x').map(|(a, b)| (a.to_owned(), b.to_owned())).ok_or("expected NθxNz")?;
    Ok((a.parse().map_err(|_| "bad Nθ")?, b.parse().map_err(|_| "bad Nz")?))
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    const ALL: [Regime; 7] = [
        Regime::Unbuckled,
        Regime::Many,
        Regime::One,
        Regime::Flat,
        Regime::FsManyTilted,
        Regime::FsFewTiltedLong,
        Regime::FsFewTilted,
    ];
    ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown regime {s}"))
}

fn parse_family(s: &str) -> Result<InterpFamily, String> {
    InterpFamily::parse(s).ok_or_else(|| format!("unknown inequality family {s}"))
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, value_enum, ignore_case = true)]
    pub model: ModelArg,
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Slope bound; "inf" for none.
    #[arg(long, default_value = "inf", value_parser = parse_slope)]
    pub m: f64,
}

impl ParamArgs {
    fn params(&self) -> CliResult<ModelParams> {
        Ok(ModelParams::new(self.h, self.lambda, self.rho, self.m)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a wrinkling construction and write it as fields.
    #[command(args_override_self = true)]
    Pattern {
        #[command(flatten)]
        p: ParamArgs,
        /// Construction branch; defaults to the predicted one.
        #[arg(long, value_parser = parse_regime)]
        regime: Option<Regime>,
        #[arg(long, requires_all = ["k", "delta", "regime"])]
        n: Option<u32>,
        #[arg(long, requires_all = ["n", "delta", "regime"])]
        k: Option<u32>,
        #[arg(long, requires_all = ["n", "k", "regime"])]
        delta: Option<f64>,
        /// Grid nodes per wrinkle.
        #[arg(long, default_value_t = 32)]
        samples: usize,
        /// Explicit grid NθxNz instead of the resolving one.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(usize, usize)>,
        #[arg(long, default_value = "pattern")]
        out: PathBuf,
    },
    /// Energy report of a stored configuration.
    #[command(args_override_self = true)]
    Evaluate {
        /// Field prefix (reads <prefix>.json and <prefix>.{rho,theta,z}.gfld).
        #[arg(long)]
        input: PathBuf,
        /// Drop the shear membrane term; defaults to the stored family.
        #[arg(long)]
        free_shear: bool,
    },
    /// Minimize an energy on a grid.
    #[command(args_override_self = true)]
    Minimize {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, value_parser = parse_grid, default_value = "16x256")]
        grid: (usize, usize),
        #[arg(long, value_enum, default_value_t = InitArg::Noise)]
        init: InitArg,
        /// Field prefix for --init file.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Peak height of the start noise.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, value_enum, default_value_t = ObstacleArg::Projection)]
        obstacle: ObstacleArg,
        #[arg(long, default_value = "minimize")]
        out: PathBuf,
    },
    /// Evaluate constructions or minimizers over log-spaced parameter values.
    #[command(args_override_self = true)]
    Sweep {
        #[arg(long, value_enum, ignore_case = true)]
        model: ModelArg,
        #[arg(long, value_enum)]
        vary: Varying,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value = "inf", value_parser = parse_slope)]
        m: f64,
        #[arg(long, value_enum, ignore_case = true, default_value_t = SweepMode::Construct)]
        mode: SweepMode,
        #[arg(long, value_parser = parse_regime)]
        regime: Option<Regime>,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, value_parser = parse_grid, default_value = "16x256")]
        grid: (usize, usize),
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        /// Record failing points instead of aborting.
        #[arg(long)]
        skip_failures: bool,
    },
    /// Log-log least-squares exponent of two sweep columns.
    #[command(args_override_self = true)]
    Fit {
        /// Sweep CSV; "-" reads stdin.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Run the lower-bound certificates on a stored configuration.
    #[command(args_override_self = true)]
    Certify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Check the interpolation inequalities on random band-limited fields.
    #[command(args_override_self = true)]
    Interp {
        /// One family; all of them by default.
        #[arg(long, value_parser = parse_family)]
        family: Option<InterpFamily>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Predicted scaling branch and value.
    #[command(args_override_self = true)]
    Oracle {
        #[command(flatten)]
        p: ParamArgs,
        /// Print the regime threshold equivalences instead.
        #[arg(long)]
        boundary: bool,
    },
}

struct Output {
    dir: Option<PathBuf>,
    format: Option<Format>,
}

impl Output {
    fn table_format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn emit(&self, stem: &str, format: Format, body: &str) -> CliResult<()> {
        match &self.dir {
            Some(d) => {
                fs::create_dir_all(d)?;
                let ext = if format == Format::Csv { "csv" } else { "json" };
                fs::write(d.join(format!("{stem}.{ext}")), body)?;
            }
            None => println!("{}", body.trim_end()),
        }
        Ok(())
    }

    fn json<T: serde::Serialize>(&self, stem: &str, v: &T) -> CliResult<()> {
        self.emit(stem, Format::Json, &serde_json::to_string_pretty(v)?)
    }

    fn table<T: serde::Serialize>(&self, stem: &str, rows: &[T], default: Format) -> CliResult<()> {
        match self.table_format(default) {
            Format::Json => self.json(stem, &rows),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(vec![]);
                for r in rows {
                    w.serialize(r)?;
                }
                let body = String::from_utf8(w.into_inner().map_err(|e| CliError::precondition(e.error()))?)
                    .map_err(CliError::precondition)?;
                self.emit(stem, Format::Csv, &body)
            }
        }
    }

    fn field_prefix(&self, prefix: &Path) -> PathBuf {
        match &self.dir {
            Some(d) => d.join(prefix),
            None => prefix.to_path_buf(),
        }
    }
}

fn slope_bound(family: Family, mp: &ModelParams, pp: &PatternParams) -> Option<f64> {
    match (family, pp.regime) {
        (_, Regime::Unbuckled) => None,
        (Family::Vkd, _) => Some(m1(mp.lambda, pp.delta)),
        (Family::Fs, _) => Some(m2(pp.delta, pp.n, pp.k, mp.lambda)),
        (Family::Nl, _) => Some(1.0),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let out = Output { dir: cli.out_dir.clone(), format: cli.format };
    match cli.command {
        Command::Pattern { p, regime, n, k, delta, samples, grid, out: prefix } => {
            let family = Family::from(p.model);
            let mp = p.params()?;
            let pp = match (n, k, delta, regime) {
                (Some(n), Some(k), Some(d), Some(r)) => PatternParams::new(n, k, d, r)?,
                (_, _, _, Some(r)) => sweep::branch_params(family, &mp, Some(r))?,
                _ => select_regime_params(family, &mp)?,
            };
            let b = PatternBuilder::default();
            let dom = match grid {
                Some((nt, nz)) if family == Family::Fs && pp.regime.is_tilted() => {
                    Domain::with_cells(nt, nz, pp.k as usize)?
                }
                Some((nt, nz)) => Domain::new(nt, nz)?,
                None => b.resolving_domain(family, &pp, samples)?,
            };
            let c = b.build(family, &mp, &pp, dom)?;
            let mut meta = Sidecar::new(family, &c);
            meta.pattern = Some(pp);
            meta.slope_bound = slope_bound(family, &mp, &pp);
            meta.report = Some(energy(&c, family == Family::Fs)?);
            gfld::save(&out.field_prefix(&prefix), &c, &meta)?;
            out.json("pattern", &meta)
        }
        Command::Evaluate { input, free_shear } => {
            let (c, meta) = gfld::load(&input)?;
            let rep = energy(&c, free_shear || meta.family == Family::Fs)?;
            out.json("evaluate", &rep)
        }
        Command::Minimize { p, grid, init, input, max_iters, tol, noise, obstacle, out: prefix } => {
            let family = Family::from(p.model);
            let mp = p.params()?;
            let opts = MinimizeOptions {
                max_iterations: max_iters,
                gradient_tolerance: tol,
                obstacle_mode: match obstacle {
                    ObstacleArg::Projection => ObstacleMode::Projection,
                    ObstacleArg::Penalty => ObstacleMode::Penalty,
                },
                initial: match init {
                    InitArg::Noise => Initial::UnbuckledPlusNoise,
                    InitArg::Pattern => Initial::PatternSeed,
                    InitArg::File => Initial::File,
                },
                noise_amplitude: noise,
                seed: cli.seed,
                ..Default::default()
            };
            let r = if init == InitArg::File {
                let input = input.ok_or_else(|| CliError::Precondition("--init file needs --input".into()))?;
                let (mut c, _) = gfld::load(&input)?;
                c.params = mp;
                minimize_from(family, c, &opts)?
            } else {
                minimize(family, &mp, Domain::new(grid.0, grid.1)?, &opts)?
            };
            let c = r.configuration().clone();
            let mut meta = Sidecar::new(family, &c);
            meta.report = Some(r.report.clone());
            meta.result = Some(r);
            gfld::save(&out.field_prefix(&prefix), &c, &meta)?;
            out.json("minimize", &meta.result)
        }
        Command::Sweep {
            model,
            vary,
            count,
            lo,
            hi,
            h,
            lambda,
            rho,
            m,
            mode,
            regime,
            samples,
            grid,
            max_iters,
            skip_failures,
        } => {
            let need = |v: Option<f64>, name: &str, varied: bool| -> CliResult<f64> {
                match (v, varied) {
                    (Some(v), _) => Ok(v),
                    (None, true) => Ok(lo),
                    (None, false) => {
                        Err(CliError::Precondition(format!("--{name} is required unless it is the varied parameter")))
                    }
                }
            };
            let h = need(h, "h", vary == Varying::H)?;
            let lambda = need(lambda, "lambda", vary == Varying::Lambda)?;
            let rho = if vary == Varying::RhoMinus1 { 1.0 + lo } else { rho };
            let m = if vary == Varying::M { lo } else { m };
            let spec = SweepSpec {
                model: model.into(),
                varying: vary,
                count,
                lo,
                hi,
                fixed: ModelParams::new(h, lambda, rho, m)?,
                mode,
                regime,
                samples,
                grid,
                minimize: MinimizeOptions { max_iterations: max_iters, seed: cli.seed, ..Default::default() },
                skip_failures,
            };
            let rows = run_sweep(&spec)?;
            match out.table_format(Format::Csv) {
                Format::Csv => {
                    let mut buf = vec![];
                    sweep::write_csv(&mut buf, &rows)?;
                    out.emit("sweep", Format::Csv, &String::from_utf8_lossy(&buf))?;
                }
                Format::Json => out.json("sweep", &rows)?,
            }
            let failed = rows.iter().filter(|r| r.certificates_failed()).count();
            if failed > 0 {
                return Err(CliError::Certificate(format!("{failed} sweep points failed a certificate")));
            }
            Ok(())
        }
        Command::Fit { input, x, y } => {
            let text = if input.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin())?
            } else {
                fs::read_to_string(&input).map_err(|e| CliError::Precondition(format!("{}: {e}", input.display())))?
            };
            let (xs, ys) = sweep::read_columns(&text, &x, &y)?;
            out.json("fit", &fit_exponent(&xs, &ys)?)
        }
        Command::Certify { input } => {
            let (c, _) = gfld::load(&input)?;
            let reports = all_certificates(&c)?;
            out.table("certify", &reports, Format::Json)?;
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(CliError::Certificate(format!("failed: {}", failed.join(", "))));
            }
            Ok(())
        }
        Command::Interp { family, samples } => {
            if samples == 0 {
                return Err(CliError::Precondition("--samples must be positive".into()));
            }
            let families = family.map_or(InterpFamily::ALL.to_vec(), |f| vec![f]);
            let reports: Vec<_> = families
                .into_iter()
                .map(|f| {
                    let ratios: Vec<Option<f64>> = (0..samples as u64)
                        .into_par_iter()
                        .map(|i| interpolation_ratio(f, &interpolation_sample(f, cli.seed, i)))
                        .collect();
                    summarize(f, ratios.into_iter())
                })
                .collect();
            out.table("interp", &reports, Format::Json)?;
            let bad: usize = reports.iter().map(|r| r.violations).sum();
            if bad > 0 {
                return Err(CliError::Certificate(format!("{bad} interpolation samples violated their inequality")));
            }
            Ok(())
        }
        Command::Oracle { p, boundary } => {
            let mp = p.params()?;
            if boundary {
                out.json("oracle", &regime_boundary(p.model.into(), &mp))
            } else {
                out.json("oracle", &predict(p.model.into(), &mp))
            }
        }
    }
}

/// Parses, runs and maps the outcome to an exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let args = match crate::config::merge(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_slope("inf"), Ok(f64::INFINITY));
        assert_eq!(parse_slope("4"), Ok(4.0));
        assert!(parse_slope("x").is_err());
        assert_eq!(parse_grid("16x256"), Ok((16, 256)));
        assert!(parse_grid("16").is_err());
        assert_eq!(parse_regime("fs_many_tilted"), Ok(Regime::FsManyTilted));
        assert!(parse_family("GN_2D_L2").is_ok());
    }

    #[test]
    fn later_flags_win() {
        let cli = Cli::try_parse_from(["mlab", "oracle", "--model", "vkd", "--h=0.1", "--lambda", "0.2", "--h", "0.3"])
            .unwrap();
        match cli.command {
            Command::Oracle { p, .. } => assert_eq!(p.h, 0.3),
            _ => unreachable!(),
        }
    }
}

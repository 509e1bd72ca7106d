//! Projected limited-memory quasi-Newton descent of the discrete energies
//! under the obstacle, slope and axial-orientation constraints.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{
    admissibility, energy_unchecked, nl_objective, vkd_objective, Configuration, EnergyReport, Model, Objective,
    Penalty,
};
use crate::error::{Error, Result};
use crate::grid::{random_band_limited, Domain, GridField, ModelParams, Spectral};
use crate::pattern::{select_regime_params, Family, PatternBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum ObstacleMode {
    Projection,
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Initial {
    UnbuckledPlusNoise,
    PatternSeed,
    /// Start from a configuration supplied to [`minimize_from`].
    File,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinimizeOptions {
    /// Iteration cap per penalty stage.
    pub max_iterations: usize,
    /// Bound on the L² norm of the projected variational gradient.
    pub gradient_tolerance: f64,
    pub obstacle_mode: ObstacleMode,
    pub slope_penalty_weight: f64,
    pub zsign_penalty_weight: f64,
    pub initial: Initial,
    /// Peak height of the radial noise bumps; the default ties it to λ.
    pub noise_amplitude: Option<f64>,
    pub seed: u64,
    /// Stored correction pairs.
    pub memory: usize,
    /// Geometric ramp of the penalty weights (×10 per stage).
    pub penalty_stages: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-6,
            obstacle_mode: ObstacleMode::Projection,
            slope_penalty_weight: 10.0,
            zsign_penalty_weight: 10.0,
            initial: Initial::UnbuckledPlusNoise,
            noise_amplitude: None,
            seed: 0,
            memory: 12,
            penalty_stages: 4,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) || self.max_iterations == 0 || self.memory == 0 || self.penalty_stages == 0
        {
            return Err(Error::InvalidParams("tolerance, iteration cap, memory and stages must be positive".into()));
        }
        if !(self.slope_penalty_weight >= 0.0 && self.zsign_penalty_weight >= 0.0) {
            return Err(Error::InvalidParams("penalty weights must be non-negative".into()));
        }
        if let Some(a) = self.noise_amplitude {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidParams(format!("noise amplitude {a} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinimizeResult {
    #[cfg_attr(feature = "serde", serde(skip))]
    pub final_config: Option<Configuration>,
    pub report: EnergyReport,
    pub initial_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub constraint_violation: f64,
    pub slope_linf: f64,
    /// L² norm of the θ-fluctuation of the radial component.
    pub axisymmetry_deviation: f64,
    /// Objective after every accepted step, penalty included.
    pub energy_history: Vec<f64>,
    pub slope_history: Vec<f64>,
}

impl MinimizeResult {
    pub fn configuration(&self) -> &Configuration {
        self.final_config.as_ref().expect("result carries its configuration")
    }
}

fn model_of(family: Family) -> Model {
    match family {
        Family::Nl => Model::Nl,
        _ => Model::Vkd,
    }
}

fn obstacle_floor(c: &Configuration) -> f64 {
    match c.model {
        Model::Vkd => c.params.rho - 1.0,
        Model::Nl => c.params.rho,
    }
}

/// Objective with the obstacle penalty added when that mode is selected.
struct Problem<'a> {
    family: Family,
    template: Configuration,
    sp: &'a Spectral,
    floor: f64,
    obstacle_weight: f64,
}

impl Problem<'_> {
    fn eval(&self, x: &[f64], pen: &Penalty) -> (f64, Vec<f64>) {
        let c = self.template.from_vector(x);
        let Objective { energy, penalty, mut gradient } = match self.family {
            Family::Nl => nl_objective(self.sp, &c, pen),
            Family::Vkd => vkd_objective(self.sp, &c, false, pen),
            Family::Fs => vkd_objective(self.sp, &c, true, pen),
        };
        let mut extra = 0.0;
        if self.obstacle_weight > 0.0 {
            let w = self.sp.domain().node_weight();
            let n = self.sp.domain().len();
            for i in 0..n {
                let gap = self.floor - x[i];
                if gap > 0.0 {
                    extra += self.obstacle_weight * gap * gap * w;
                    gradient[i] -= 2.0 * self.obstacle_weight * gap * w;
                }
            }
        }
        (energy + penalty + extra, gradient)
    }

    fn project(&self, x: &mut [f64]) {
        if self.obstacle_weight == 0.0 {
            let n = self.sp.domain().len();
            x[..n].iter_mut().for_each(|v| *v = v.max(self.floor));
        }
    }

    /// Gradient with the components pinned at the obstacle removed.
    fn projected(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let n = self.sp.domain().len();
        let mut pg = g.to_vec();
        if self.obstacle_weight == 0.0 {
            for i in 0..n {
                if x[i] <= self.floor && g[i] > 0.0 {
                    pg[i] = 0.0;
                }
            }
        }
        pg
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion applied to `g` (already zeroed on the active set).
fn lbfgs_direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Stage {
    iterations: usize,
    gradient_norm: f64,
}

fn descend(
    prob: &Problem,
    x: &mut Vec<f64>,
    pen: &Penalty,
    opts: &MinimizeOptions,
    history: &mut Vec<f64>,
    slopes: &mut Vec<f64>,
) -> Result<Stage> {
    let dom = *prob.sp.domain();
    let n = dom.len();
    let node_w = dom.node_weight();
    let l2 = |pg: &[f64]| libm::sqrt(dot(pg, pg) / node_w);
    let active_fixed = |x: &[f64], g: &[f64]| -> Vec<bool> {
        (0..x.len()).map(|i| prob.obstacle_weight == 0.0 && i < n && x[i] <= prob.floor && g[i] > 0.0).collect()
    };
    prob.project(x);
    let (mut f, mut g) = prob.eval(x, pen);
    if !f.is_finite() {
        return Err(Error::Numerical("non-finite initial objective".into()));
    }
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut gnorm = l2(&prob.projected(x, &g));
    while iterations < opts.max_iterations && gnorm > opts.gradient_tolerance {
        let fixed = active_fixed(x, &g);
        let mut gf = g.clone();
        gf.iter_mut().zip(&fixed).for_each(|(v, &a)| {
            if a {
                *v = 0.0
            }
        });
        let mut d = lbfgs_direction(&gf, &pairs);
        d.iter_mut().zip(&fixed).for_each(|(v, &a)| {
            if a {
                *v = 0.0
            }
        });
        let mut slope = dot(&d, &gf);
        if !(slope < 0.0) || pairs.is_empty() {
            // steepest descent, scaled so the largest nodal move is modest
            pairs.clear();
            let gmax = gf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = if gmax > 0.0 { 1e-3 / gmax } else { 0.0 };
            d = gf.iter().map(|v| -scale * v).collect();
            slope = dot(&d, &gf);
        }
        if slope == 0.0 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            prob.project(&mut xn);
            let (fnew, gnew) = prob.eval(&xn, pen);
            let moved: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if fnew.is_finite() && fnew <= f + 1e-4 * decrease.min(0.0) && fnew <= f {
                accepted = Some((xn, fnew, gnew, moved));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew, s)) = accepted else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let stalled = (f - fnew).abs() <= 1e-15 * f.abs().max(1e-300);
        *x = xn;
        f = fnew;
        g = gnew;
        iterations += 1;
        history.push(f);
        slopes.push(slope_linf_of(&prob.template.from_vector(x), prob.sp));
        gnorm = l2(&prob.projected(x, &g));
        if stalled && pairs.is_empty() {
            break;
        }
    }
    Ok(Stage { iterations, gradient_norm: gnorm })
}

fn slope_linf_of(c: &Configuration, sp: &Spectral) -> f64 {
    crate::energy::Derivs::compute(sp, c, false).slope_linf()
}

/// Default radial noise height: bumps of this size and width ~ 1/8 carry an
/// axial slope comparable to the √(2λ) that relieves the confinement.
fn default_noise(mp: &ModelParams) -> f64 {
    0.5 * libm::sqrt(2.0 * mp.lambda) / 8.0
}

/// Mode cap for start noise, so refining the grid does not sharpen the start.
const NOISE_MODES: usize = 4;

/// Unbuckled state plus smooth, non-negative radial bumps.
pub fn noisy_start(family: Family, mp: &ModelParams, dom: Domain, amplitude: f64, seed: u64) -> Configuration {
    let mut c = match family {
        Family::Nl => Configuration::uniform_nl(dom, *mp),
        _ => Configuration::unbuckled_vkd(dom, *mp),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kt = (dom.n_theta / 16).clamp(1, NOISE_MODES);
    let kz = (dom.n_z / 16).clamp(1, NOISE_MODES);
    let noise = random_band_limited(dom, &mut rng, kt, kz);
    let sq = noise.map(|v| v * v);
    let peak = sq.max_abs();
    if peak > 0.0 {
        c.comp_rho = c.comp_rho.zip_map(&sq, |a, b| a + amplitude * b / peak);
    }
    c
}

/// Minimizes from the start selected by `opts.initial`.
pub fn minimize(family: Family, mp: &ModelParams, dom: Domain, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    opts.validate()?;
    let start = match opts.initial {
        Initial::UnbuckledPlusNoise => {
            let amp = opts.noise_amplitude.unwrap_or_else(|| default_noise(mp));
            noisy_start(family, mp, dom, amp, opts.seed)
        }
        Initial::PatternSeed => {
            let pp = select_regime_params(family, mp)?;
            PatternBuilder::default().build(family, mp, &pp, dom)?
        }
        Initial::File => {
            return Err(Error::InvalidParams("a FILE start needs minimize_from with a configuration".into()));
        }
    };
    minimize_from(family, start, opts)
}

/// Minimizes from a given configuration.
pub fn minimize_from(family: Family, start: Configuration, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    opts.validate()?;
    if start.model != model_of(family) {
        return Err(Error::ModelMismatch { expected: model_of(family).name(), found: start.model.name() });
    }
    if family == Family::Fs && start.params.rho != 1.0 {
        return Err(Error::InvalidParams("the free-shear energy is defined on a neutral mandrel".into()));
    }
    let dom = start.domain();
    let mp = start.params;
    let sp = Spectral::new(&dom);
    let penalized_slope = mp.m.is_finite() && opts.slope_penalty_weight > 0.0;
    let penalized_zsign = family == Family::Nl && opts.zsign_penalty_weight > 0.0;
    let ramps = penalized_slope || penalized_zsign || opts.obstacle_mode == ObstacleMode::Penalty;
    let stages = if ramps { opts.penalty_stages } else { 1 };
    let mut prob =
        Problem { family, template: start.clone(), sp: &sp, floor: obstacle_floor(&start), obstacle_weight: 0.0 };
    let mut x = start.to_vector();
    prob.project(&mut x);
    let initial_energy = prob.eval(&x, &Penalty::default()).0;
    let mut history = vec![];
    let mut slopes = vec![];
    let mut iterations = 0;
    let mut gnorm = f64::INFINITY;
    for stage in 0..stages {
        let ramp = libm::pow(10.0, stage as f64);
        let pen = Penalty {
            slope_weight: if penalized_slope { opts.slope_penalty_weight * ramp } else { 0.0 },
            zsign_weight: if penalized_zsign { opts.zsign_penalty_weight * ramp } else { 0.0 },
        };
        if opts.obstacle_mode == ObstacleMode::Penalty {
            prob.obstacle_weight = 1e3 * ramp;
        }
        let st = descend(&prob, &mut x, &pen, opts, &mut history, &mut slopes)?;
        iterations += st.iterations;
        gnorm = st.gradient_norm;
    }
    if opts.obstacle_mode == ObstacleMode::Penalty {
        // final feasibility is enforced, never assumed
        let n = dom.len();
        x[..n].iter_mut().for_each(|v| *v = v.max(prob.floor));
    }
    let fin = start.from_vector(&x);
    let report = energy_unchecked(&fin, family == Family::Fs);
    let constraint_violation = admissibility(&fin).iter().fold(0.0f64, |m, v| m.max(v.amount));
    let converged = gnorm <= opts.gradient_tolerance && constraint_violation <= 1e-6;
    let axisymmetry_deviation = theta_fluctuation(&fin.comp_rho);
    Ok(MinimizeResult {
        slope_linf: report.slope_linf,
        final_config: Some(fin),
        report,
        initial_energy,
        iterations,
        converged,
        gradient_norm: gnorm,
        constraint_violation,
        axisymmetry_deviation,
        energy_history: history,
        slope_history: slopes,
    })
}

fn theta_fluctuation(f: &GridField) -> f64 {
    let avg = crate::grid::theta_average(f);
    let nz = f.domain.n_z;
    let s: f64 = f
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let e = v - avg.values[i % nz];
            e * e
        })
        .sum();
    libm::sqrt(s * f.domain.node_weight())
}

/// Largest relative mismatch between the analytic directional derivative
/// and a central difference with step 1e−5, over smooth random directions.
pub fn gradient_check(family: Family, c: &Configuration, directions: usize, seed: u64) -> Result<f64> {
    if c.model != model_of(family) {
        return Err(Error::ModelMismatch { expected: model_of(family).name(), found: c.model.name() });
    }
    let dom = c.domain();
    let sp = Spectral::new(&dom);
    let prob = Problem { family, template: c.clone(), sp: &sp, floor: f64::NEG_INFINITY, obstacle_weight: 0.0 };
    let pen = Penalty::default();
    let x = c.to_vector();
    let (_, g) = prob.eval(&x, &pen);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kt = (dom.n_theta / 8).max(1);
    let kz = (dom.n_z / 8).max(1);
    let step = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let mut d = Vec::with_capacity(x.len());
        for _ in 0..3 {
            d.extend(random_band_limited(dom, &mut rng, kt, kz).values);
        }
        let norm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d.iter_mut().for_each(|v| *v /= norm);
        let plus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
        let minus: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - step * b).collect();
        let fd = (prob.eval(&plus, &pen).0 - prob.eval(&minus, &pen).0) / (2.0 * step);
        let an = dot(&g, &d);
        let err = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-300);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn smooth_field(family: Family, mp: ModelParams, dom: Domain, seed: u64, scale: f64) -> Configuration {
        let mut c = noisy_start(family, &mp, dom, 0.05, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let peak = |f: GridField| {
            let m = f.max_abs();
            f.scale(scale / m)
        };
        c.comp_theta = peak(random_band_limited(dom, &mut rng, 2, 3));
        c.comp_z = peak(random_band_limited(dom, &mut rng, 2, 3));
        c
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let dom = Domain::new(16, 32).unwrap();
        let cases = [
            (Family::Vkd, ModelParams::new(0.05, 0.2, 1.3, f64::INFINITY).unwrap()),
            (Family::Fs, ModelParams::new(0.05, 0.2, 1.0, f64::INFINITY).unwrap()),
            (Family::Nl, ModelParams::new(0.05, 0.2, 1.3, f64::INFINITY).unwrap()),
        ];
        for (family, mp) in cases {
            for seed in 0..5 {
                let c = smooth_field(family, mp, dom, seed, 0.02);
                let err = gradient_check(family, &c, 4, seed).unwrap();
                assert!(err <= 1e-6, "{family:?} seed {seed}: {err:e}");
            }
        }
    }

    #[test]
    fn thick_neutral_sheet_stays_unbuckled() {
        let mp = ModelParams::new(0.2, 0.1, 1.0, f64::INFINITY).unwrap();
        let r = minimize(Family::Vkd, &mp, Domain::new(8, 32).unwrap(), &MinimizeOptions::default()).unwrap();
        let target = 2.0 * PI * 0.01;
        assert!((r.report.excess - target).abs() <= 0.05 * target, "{}", r.report.excess);
        assert!(r.axisymmetry_deviation < 1e-2, "{} {}", r.report.excess, r.axisymmetry_deviation);
    }

    #[test]
    fn accepted_energies_never_increase() {
        let mp = ModelParams::new(0.01, 0.25, 1.5, f64::INFINITY).unwrap();
        let opts = MinimizeOptions { max_iterations: 300, ..Default::default() };
        let r = minimize(Family::Vkd, &mp, Domain::new(8, 128).unwrap(), &opts).unwrap();
        assert!(r.energy_history.len() > 10);
        assert!(r.energy_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.slope_history.len(), r.energy_history.len());
        assert!(r.report.total <= r.initial_energy);
        assert!(r.configuration().comp_rho.min() >= 0.5 - 1e-12);
        assert!(r.report.excess >= -1e-9);
    }

    #[test]
    fn pattern_seed_only_improves() {
        let mp = ModelParams::new(0.01, 0.25, 1.5, 4.0).unwrap();
        let pp = select_regime_params(Family::Vkd, &mp).unwrap();
        let dom = PatternBuilder::default().resolving_domain(Family::Vkd, &pp, 32).unwrap();
        let seed = PatternBuilder::default().build(Family::Vkd, &mp, &pp, dom).unwrap();
        let before = energy_unchecked(&seed, false).total;
        let opts = MinimizeOptions { max_iterations: 100, penalty_stages: 2, ..Default::default() };
        let r = minimize_from(Family::Vkd, seed, &opts).unwrap();
        assert!(r.report.total <= before + 1e-12);
    }

    #[test]
    fn nonlinear_run_respects_constraints() {
        let mp = ModelParams::new(0.02, 0.2, 1.2, 1.0).unwrap();
        let opts = MinimizeOptions { max_iterations: 150, ..Default::default() };
        let r = minimize(Family::Nl, &mp, Domain::new(8, 64).unwrap(), &opts).unwrap();
        assert!(r.report.total >= r.report.bulk - 1e-9);
        assert!(r.configuration().comp_rho.min() >= 1.2 - 1e-12);
        assert!(r.constraint_violation < 0.05, "{}", r.constraint_violation);
    }

    #[test]
    fn penalty_obstacle_ends_feasible() {
        let mp = ModelParams::new(0.01, 0.25, 1.5, f64::INFINITY).unwrap();
        let opts = MinimizeOptions { max_iterations: 100, obstacle_mode: ObstacleMode::Penalty, ..Default::default() };
        let r = minimize(Family::Vkd, &mp, Domain::new(8, 64).unwrap(), &opts).unwrap();
        assert!(r.configuration().comp_rho.min() >= 0.5);
    }

    #[test]
    fn runs_are_reproducible() {
        let mp = ModelParams::new(0.01, 0.25, 1.5, f64::INFINITY).unwrap();
        let opts = MinimizeOptions { max_iterations: 50, seed: 3, ..Default::default() };
        let dom = Domain::new(8, 64).unwrap();
        let a = minimize(Family::Vkd, &mp, dom, &opts).unwrap();
        let b = minimize(Family::Vkd, &mp, dom, &opts).unwrap();
        assert_eq!(a.energy_history, b.energy_history);
    }

    #[test]
    fn bad_options_and_starts_are_refused() {
        let mp = ModelParams::new(0.01, 0.25, 1.5, f64::INFINITY).unwrap();
        let dom = Domain::new(8, 32).unwrap();
        let bad = MinimizeOptions { gradient_tolerance: 0.0, ..Default::default() };
        assert!(minimize(Family::Vkd, &mp, dom, &bad).is_err());
        let file = MinimizeOptions { initial: Initial::File, ..Default::default() };
        assert!(minimize(Family::Vkd, &mp, dom, &file).is_err());
        let nl = Configuration::uniform_nl(dom, mp);
        assert!(matches!(
            minimize_from(Family::Vkd, nl, &MinimizeOptions::default()),
            Err(Error::ModelMismatch { .. })
        ));
        let not_neutral = Configuration::unbuckled_vkd(dom, mp);
        assert!(minimize_from(Family::Fs, not_neutral, &MinimizeOptions::default()).is_err());
    }
}

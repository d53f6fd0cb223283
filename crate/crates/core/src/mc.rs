//! Time-domain Monte Carlo of the measured oscillator in the rotating frame.
//!
//! The signal is the complex envelope `z` of the resonant mode, a mean-reverting
//! process with decay `gamma0/2` whose spectrum equals the model's `S_xx`. The
//! record is `r = z + n` with white imprecision `E|n|^2 = S_imp / dt` per
//! sample. Quadratures map as `x = sqrt(2) Re z`, `p = -sqrt(2) m omega0 Im z`.
//!
//! Noise is classical Gaussian with the quantum model's symmetrized spectra.
//! Each batch draws from its own ChaCha20 stream `(seed, batch)`, so results
//! are bit-identical for a given `(seed, config)` regardless of thread count.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{closed_loop, LoopModel};
use crate::models::{near_resonance_model, Observable, OscMeasParams, SpectralModel};
use crate::ratpoly::RationalFn;
use crate::wiener::synthesize;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn default_noise_scale() -> f64 {
    1.0
}

fn default_trace_rows() -> usize {
    10_000
}

fn default_warmup() -> f64 {
    40.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: OscMeasParams,
    /// Time step.
    pub dt: f64,
    /// Recorded duration per batch, after warmup.
    pub duration: f64,
    pub n_batches: usize,
    pub seed: u64,
    /// Multiplies every noise amplitude; 0 gives noiseless runs.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    /// Rows of batch 0 kept for trace export.
    #[serde(default = "default_trace_rows")]
    pub trace_rows: usize,
    /// Discarded settling time per batch, in units of `1 / gamma_w`.
    #[serde(default = "default_warmup")]
    pub warmup_bandwidths: f64,
}

impl SimConfig {
    /// `dt = 0.01 / gamma_w`, `duration = 2000 / gamma_w`.
    pub fn standard(params: OscMeasParams, n_batches: usize, seed: u64) -> Result<Self> {
        let gw = params.rates()?.gamma_w;
        Ok(SimConfig {
            params,
            dt: 0.01 / gw,
            duration: 2000.0 / gw,
            n_batches,
            seed,
            noise_scale: 1.0,
            trace_rows: default_trace_rows(),
            warmup_bandwidths: default_warmup(),
        })
    }

    pub fn validate(&self) -> Result<SpectralModel> {
        let model = near_resonance_model(&self.params).map_err(|e| Error::Config(e.to_string()))?;
        let gw = model.rates.gamma_w;
        let tol = 1e-9;
        if !(self.dt > 0.0) || self.dt > 0.05 / gw * (1.0 + tol) {
            return Err(Error::Config(format!("dt = {} must lie in (0, 0.05/gamma_w = {}]", self.dt, 0.05 / gw)));
        }
        if !(self.duration >= 200.0 / gw * (1.0 - tol)) || !self.duration.is_finite() {
            return Err(Error::Config(format!(
                "duration = {} must be at least 200/gamma_w = {}",
                self.duration,
                200.0 / gw
            )));
        }
        if self.n_batches == 0 {
            return Err(Error::Config("n_batches must be positive".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config("noise_scale must be >= 0".into()));
        }
        if !(self.warmup_bandwidths >= 0.0) {
            return Err(Error::Config("warmup must be >= 0".into()));
        }
        Ok(model)
    }

    fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn warmup_steps(&self, gamma_w: f64) -> usize {
        (self.warmup_bandwidths / gamma_w / self.dt).ceil() as usize
    }
}

/// Impulse-invariant recursive filter with a DC-matched instantaneous tap.
///
/// Taps are `h[n] = dt h(n dt)` for `n >= 1`; `h[0]` is chosen so the
/// discrete DC gain equals `W(0)` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteFilter {
    pub instantaneous: Complex64,
    /// `(dt * residue, exp(pole * dt))` per pole.
    pub poles: Vec<(Complex64, Complex64)>,
    state: Vec<Complex64>,
}

pub fn discretize_filter(w: &RationalFn, dt: f64) -> Result<DiscreteFilter> {
    if !w.is_proper() {
        return Err(Error::Usage("cannot discretize an improper filter".into()));
    }
    let pf = w.partial_fractions()?;
    let mut h0 = pf.direct();
    let mut poles = Vec::with_capacity(pf.terms.len());
    for t in &pf.terms {
        if t.pole.re >= 0.0 || crate::ratpoly::is_marginal(t.pole) {
            return Err(Error::Usage(format!("filter pole {} is not causal", t.pole)));
        }
        let q = (t.pole * dt).exp();
        let g = t.residue * dt;
        h0 += -t.residue / t.pole - g * q / (1.0 - q);
        poles.push((g, q));
    }
    Ok(DiscreteFilter {
        instantaneous: h0,
        state: vec![ZERO; poles.len()],
        poles,
    })
}

impl DiscreteFilter {
    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = ZERO);
    }

    /// Contribution of past inputs to the current output.
    pub fn past(&self) -> Complex64 {
        self.poles.iter().zip(&self.state).map(|((g, _), s)| g * s).sum()
    }

    /// Output for input `x` at the current step, then advance.
    pub fn step(&mut self, x: Complex64) -> Complex64 {
        let y = self.instantaneous * x + self.past();
        self.advance(x);
        y
    }

    fn advance(&mut self, x: Complex64) {
        for ((_, q), s) in self.poles.iter().zip(self.state.iter_mut()) {
            *s = *q * (*s + x);
        }
    }

    pub fn impulse_response(&self, n: usize) -> Vec<Complex64> {
        let mut f = self.clone();
        f.reset();
        (0..n).map(|k| f.step(if k == 0 { Complex64::new(1.0, 0.0) } else { ZERO })).collect()
    }

    pub fn dc_gain(&self) -> Complex64 {
        self.instantaneous + self.poles.iter().map(|(g, q)| g * q / (1.0 - q)).sum::<Complex64>()
    }

    /// Filters a whole sequence from rest.
    pub fn apply(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut f = self.clone();
        f.reset();
        input.iter().map(|x| f.step(*x)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceSet {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_e: Vec<f64>,
    pub p_e: Vec<f64>,
    pub dx: Vec<f64>,
    pub dp: Vec<f64>,
}

impl TraceSet {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV with header `t,x,y,x_e,p_e,dx,dp`, shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y,x_e,p_e,dx,dp")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.t[i], self.x[i], self.y[i], self.x_e[i], self.p_e[i], self.dx[i], self.dp[i]
            )?;
        }
        Ok(())
    }

    fn push(&mut self, t: f64, z: Complex64, y: Complex64, ze: Complex64, pscale: f64) {
        let r2 = std::f64::consts::SQRT_2;
        let x = r2 * z.re;
        let xe = r2 * ze.re;
        let p = -r2 * pscale * z.im;
        let pe = -r2 * pscale * ze.im;
        self.t.push(t);
        self.x.push(x);
        self.y.push(r2 * y.re);
        self.x_e.push(xe);
        self.p_e.push(pe);
        self.dx.push(x - xe);
        self.dp.push(p - pe);
    }
}

/// Error variances in zero-point units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Moments {
    pub sigma_dx2: f64,
    pub sigma_dp2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimStats {
    pub config: SimConfig,
    pub empirical: Moments,
    pub analytic: Moments,
    /// Standard errors of the empirical values, from batch means.
    pub se: Moments,
    pub n_batches: usize,
}

impl SimStats {
    /// `(empirical - analytic) / se` for x.
    pub fn z_score(&self) -> f64 {
        let d = self.empirical.sigma_dx2 - self.analytic.sigma_dx2;
        if self.se.sigma_dx2 > 0.0 {
            d / self.se.sigma_dx2
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpenLoopRun {
    pub traces: TraceSet,
    pub stats: SimStats,
}

#[derive(Clone, Debug)]
pub struct ClosedLoopRun {
    /// In-loop traces of batch 0.
    pub traces: TraceSet,
    pub inloop: SimStats,
    /// Open-loop run on the same noise.
    pub open: SimStats,
    /// Mean of in-loop minus open-loop variances, paired by batch.
    pub difference: Moments,
    pub difference_se: Moments,
}

struct Engine {
    model: SpectralModel,
    w_x: DiscreteFilter,
    decay: f64,
    drive: f64,
    imprecision: f64,
    steps: usize,
    warmup: usize,
}

impl Engine {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let model = cfg.validate()?;
        let w = synthesize(&model, Observable::X)?.filter;
        let g = 0.5 * model.rates.gamma0;
        let a = model.rates.x_zpf.powi(2) * (model.rates.gamma_th + model.rates.gamma_meas);
        let decay = (-g * cfg.dt).exp();
        let drive = cfg.noise_scale * ((a / g) * (1.0 - decay * decay)).sqrt();
        let imprecision = cfg.noise_scale * (model.s_imp / cfg.dt).sqrt();
        Ok(Engine {
            w_x: discretize_filter(&w, cfg.dt)?,
            warmup: cfg.warmup_steps(model.rates.gamma_w),
            steps: cfg.steps(),
            model,
            decay,
            drive,
            imprecision,
        })
    }

    fn stationary(&self, cfg: &SimConfig) -> f64 {
        let g = 0.5 * self.model.rates.gamma0;
        let a = self.model.rates.x_zpf.powi(2) * (self.model.rates.gamma_th + self.model.rates.gamma_meas);
        cfg.noise_scale * (a / g).sqrt()
    }

    /// Every noise source scales with `noise_scale`, so the variance does too.
    fn analytic(&self, cfg: &SimConfig) -> Moments {
        let v = self.model.rates.sigma_dx2_closed_form() * cfg.noise_scale * cfg.noise_scale;
        Moments { sigma_dx2: v, sigma_dp2: v }
    }

    fn scales(&self) -> (f64, f64) {
        let x = self.model.rates.x_zpf;
        let p = self.model.rates.p_zpf;
        let m = self.model.params.mass * self.model.params.omega0;
        (2.0 / (x * x), 2.0 * m * m / (p * p))
    }
}

fn complex_normal(rng: &mut ChaCha20Rng) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Per-sample signal and record of one batch.
struct NoiseStream {
    rng: ChaCha20Rng,
    z: Complex64,
}

impl NoiseStream {
    fn new(engine: &Engine, cfg: &SimConfig, batch: usize) -> Self {
        let mut rng = batch_rng(cfg.seed, batch);
        let z = complex_normal(&mut rng) * engine.stationary(cfg);
        NoiseStream { rng, z }
    }

    /// Current signal and its record; then advance the signal.
    fn next(&mut self, e: &Engine) -> (Complex64, Complex64) {
        let n = complex_normal(&mut self.rng) * e.imprecision;
        let z = self.z;
        let xi = complex_normal(&mut self.rng);
        self.z = e.decay * self.z + e.drive * xi;
        (z, z + n)
    }
}

#[derive(Default)]
struct BatchSums {
    dx2: f64,
    dp2: f64,
}

impl BatchSums {
    fn add(&mut self, dz: Complex64, scale: (f64, f64)) {
        self.dx2 += scale.0 * dz.re * dz.re;
        self.dp2 += scale.1 * dz.im * dz.im;
    }

    fn mean(&self, n: usize) -> Moments {
        Moments {
            sigma_dx2: self.dx2 / n as f64,
            sigma_dp2: self.dp2 / n as f64,
        }
    }
}

fn summarize(batches: &[Moments]) -> (Moments, Moments) {
    let n = batches.len() as f64;
    let mean = Moments {
        sigma_dx2: batches.iter().map(|m| m.sigma_dx2).sum::<f64>() / n,
        sigma_dp2: batches.iter().map(|m| m.sigma_dp2).sum::<f64>() / n,
    };
    if batches.len() < 2 {
        return (mean, Moments::default());
    }
    let var = |f: &dyn Fn(&Moments) -> f64, mu: f64| batches.iter().map(|m| (f(m) - mu).powi(2)).sum::<f64>() / (n - 1.0);
    let se = Moments {
        sigma_dx2: (var(&|m| m.sigma_dx2, mean.sigma_dx2) / n).sqrt(),
        sigma_dp2: (var(&|m| m.sigma_dp2, mean.sigma_dp2) / n).sqrt(),
    };
    (mean, se)
}

fn open_batch(e: &Engine, cfg: &SimConfig, batch: usize, keep_trace: bool) -> (Moments, TraceSet) {
    let mut noise = NoiseStream::new(e, cfg, batch);
    let mut w = e.w_x.clone();
    w.reset();
    let mut sums = BatchSums::default();
    let mut trace = TraceSet { dt: cfg.dt, ..Default::default() };
    let scale = e.scales();
    let pscale = e.model.params.mass * e.model.params.omega0;
    for k in 0..e.warmup + e.steps {
        let (z, r) = noise.next(e);
        let ze = w.step(r);
        if k >= e.warmup {
            sums.add(z - ze, scale);
            let j = k - e.warmup;
            if keep_trace && j < cfg.trace_rows {
                trace.push(j as f64 * cfg.dt, z, r, ze, pscale);
            }
        }
    }
    (sums.mean(e.steps), trace)
}

pub fn simulate_open_loop(cfg: &SimConfig) -> Result<OpenLoopRun> {
    let e = Engine::new(cfg)?;
    let results: Vec<(Moments, TraceSet)> = (0..cfg.n_batches)
        .into_par_iter()
        .map(|b| open_batch(&e, cfg, b, b == 0))
        .collect();
    let moments: Vec<Moments> = results.iter().map(|r| r.0).collect();
    let (empirical, se) = summarize(&moments);
    let traces = results.into_iter().next().map(|r| r.1).unwrap_or_default();
    Ok(OpenLoopRun {
        traces,
        stats: SimStats {
            config: cfg.clone(),
            empirical,
            analytic: e.analytic(cfg),
            se,
            n_batches: cfg.n_batches,
        },
    })
}

struct LoopFilters {
    plant: DiscreteFilter,
    controller: DiscreteFilter,
}

struct ClosedBatch {
    inloop: Moments,
    open: Moments,
    trace: TraceSet,
    record: Vec<Complex64>,
}

/// In-loop estimator realized as `W_c = W_o / K_c + K`: the controller output
/// plus `W_o` applied to the record with the plant's feedback contribution
/// removed.
fn closed_batch(
    e: &Engine,
    cfg: &SimConfig,
    lf: &LoopFilters,
    batch: usize,
    keep_trace: bool,
    keep_record: bool,
) -> Result<ClosedBatch> {
    let mut noise = NoiseStream::new(e, cfg, batch);
    let (mut plant, mut ctrl) = (lf.plant.clone(), lf.controller.clone());
    plant.reset();
    ctrl.reset();
    let mut w_open = e.w_x.clone();
    w_open.reset();
    let mut w_in = e.w_x.clone();
    w_in.reset();
    let (mut s_in, mut s_open) = (BatchSums::default(), BatchSums::default());
    let mut trace = TraceSet { dt: cfg.dt, ..Default::default() };
    let mut record = Vec::new();
    let scale = e.scales();
    let pscale = e.model.params.mass * e.model.params.omega0;
    let loop_gain = 1.0 - plant.instantaneous * ctrl.instantaneous;
    let guard = 1e6 * (e.stationary(cfg) + e.imprecision).max(f64::MIN_POSITIVE);
    for k in 0..e.warmup + e.steps {
        let (z_o, r_o) = noise.next(e);
        let ze_o = w_open.step(r_o);
        // Solve y_c = r_o + M(u), u = K(y_c) for the current sample.
        let (m_past, k_past) = (plant.past(), ctrl.past());
        let y_c = (r_o + plant.instantaneous * k_past + m_past) / loop_gain;
        let u = ctrl.step(y_c);
        let m = plant.step(u);
        if !(y_c.norm() <= guard) {
            return Err(Error::Instability { poles: Vec::new() });
        }
        let z_c = z_o + u;
        let ze_c = u + w_in.step(y_c - m);
        if k >= e.warmup {
            s_in.add(z_c - ze_c, scale);
            s_open.add(z_o - ze_o, scale);
            let j = k - e.warmup;
            if keep_trace && j < cfg.trace_rows {
                trace.push(j as f64 * cfg.dt, z_c, y_c, ze_c, pscale);
            }
            if keep_record {
                record.push(y_c);
            }
        }
    }
    Ok(ClosedBatch {
        inloop: s_in.mean(e.steps),
        open: s_open.mean(e.steps),
        trace,
        record,
    })
}

pub fn simulate_closed_loop(cfg: &SimConfig, lp: &LoopModel) -> Result<ClosedLoopRun> {
    closed_loop(lp)?;
    let e = Engine::new(cfg)?;
    let lf = LoopFilters {
        plant: discretize_filter(&lp.plant, cfg.dt)?,
        controller: discretize_filter(&lp.controller, cfg.dt)?,
    };
    let results: Vec<ClosedBatch> = (0..cfg.n_batches)
        .into_par_iter()
        .map(|b| closed_batch(&e, cfg, &lf, b, b == 0, false))
        .collect::<Result<_>>()?;
    let inl: Vec<Moments> = results.iter().map(|r| r.inloop).collect();
    let opn: Vec<Moments> = results.iter().map(|r| r.open).collect();
    let diff: Vec<Moments> = results
        .iter()
        .map(|r| Moments {
            sigma_dx2: r.inloop.sigma_dx2 - r.open.sigma_dx2,
            sigma_dp2: r.inloop.sigma_dp2 - r.open.sigma_dp2,
        })
        .collect();
    let (ei, si) = summarize(&inl);
    let (eo, so) = summarize(&opn);
    let (ed, sd) = summarize(&diff);
    let stats = |empirical, se| SimStats {
        config: cfg.clone(),
        empirical,
        analytic: e.analytic(cfg),
        se,
        n_batches: cfg.n_batches,
    };
    let traces = results.into_iter().next().map(|r| r.trace).unwrap_or_default();
    Ok(ClosedLoopRun {
        traces,
        inloop: stats(ei, si),
        open: stats(eo, so),
        difference: ed,
        difference_se: sd,
    })
}

/// Records of every batch after warmup: open-loop `r`, or the in-loop `y_c`
/// when a loop is given.
pub fn simulate_records(cfg: &SimConfig, lp: Option<&LoopModel>) -> Result<Vec<Vec<Complex64>>> {
    let e = Engine::new(cfg)?;
    match lp {
        None => Ok((0..cfg.n_batches)
            .into_par_iter()
            .map(|b| {
                let mut noise = NoiseStream::new(&e, cfg, b);
                (0..e.warmup + e.steps)
                    .map(|_| noise.next(&e).1)
                    .skip(e.warmup)
                    .collect()
            })
            .collect()),
        Some(lp) => {
            closed_loop(lp)?;
            let lf = LoopFilters {
                plant: discretize_filter(&lp.plant, cfg.dt)?,
                controller: discretize_filter(&lp.controller, cfg.dt)?,
            };
            (0..cfg.n_batches)
                .into_par_iter()
                .map(|b| closed_batch(&e, cfg, &lf, b, false, true).map(|r| r.record))
                .collect()
        }
    }
}

/// Averaged Hann-window periodogram of complex series, as a two-sided
/// density over angular frequency. Segments of `seg_len` overlap by half.
/// Returns `(omega, psd)` with `omega` ascending.
pub fn averaged_periodogram(series: &[Vec<Complex64>], dt: f64, seg_len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(seg_len);
    let window: Vec<f64> = (0..seg_len)
        .map(|n| {
            let s = (std::f64::consts::PI * n as f64 / seg_len as f64).sin();
            s * s
        })
        .collect();
    let norm: f64 = window.iter().map(|w| w * w).sum();
    let mut acc = vec![0.0; seg_len];
    let mut count = 0usize;
    let mut buf = vec![ZERO; seg_len];
    for s in series {
        let mut start = 0;
        while start + seg_len <= s.len() {
            for n in 0..seg_len {
                buf[n] = s[start + n] * window[n];
            }
            fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            count += 1;
            start += seg_len / 2;
        }
    }
    let scale = dt / (norm * count.max(1) as f64);
    let dw = 2.0 * std::f64::consts::PI / (seg_len as f64 * dt);
    // The transform uses exp(-i w t); the envelope axis is s = i delta with
    // the same sign, so bin k sits at delta = k dw.
    let half = seg_len / 2;
    let mut out: Vec<(f64, f64)> = (0..seg_len)
        .map(|k| {
            let kk = if k < half { k as f64 } else { k as f64 - seg_len as f64 };
            (kk * dw, acc[k] * scale)
        })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out.into_iter().unzip()
}

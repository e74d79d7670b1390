//! Fixed-step RK4 trajectories and empirical audits.
//!
//! Inputs may jump at breakpoints, so every sample keeps both the value
//! used from `t_k` onwards and the left limit arriving at `t_k`. Quadrature
//! over `[t_k, t_{k+1}]` pairs the right value at `t_k` with the left limit
//! at `t_{k+1}`, which keeps the trapezoidal error `O(dt²)` when breakpoints
//! sit on the time grid.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::supply::SupplyIntegrand;
use crate::sysmodel::{AffineSystem, LtiSystem, StorageCandidate, SystemModel};

/// State norm beyond which a run is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state norm exceeded {guard:e} at t = {t}")]
    Diverged { t: f64, guard: f64 },
    #[error("evaluation at t = {t}: {source}")]
    Eval { t: f64, source: EvalError },
    #[error("invalid simulation parameters: {0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Something with state, input and output all of dimension `n`.
pub trait Plant: Sync {
    fn n(&self) -> usize;
    fn xdot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError>;
    fn output(&self, x: &[f64]) -> Result<Vec<f64>, EvalError>;
    /// `ẏ` by the chain rule.
    fn ydot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError>;
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    m * DVector::from_column_slice(v)
}

impl Plant for LtiSystem {
    fn n(&self) -> usize {
        LtiSystem::n(self)
    }

    fn xdot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok((mat_vec(&self.a, x) + mat_vec(&self.b, u)).as_slice().to_vec())
    }

    fn output(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(mat_vec(&self.c, x).as_slice().to_vec())
    }

    fn ydot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let xd = self.xdot(x, u)?;
        Ok(mat_vec(&self.c, &xd).as_slice().to_vec())
    }
}

impl Plant for AffineSystem {
    fn n(&self) -> usize {
        AffineSystem::n(self)
    }

    fn xdot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let f = DVector::from_vec(self.f.eval(x)?);
        let g = self.g.eval(x)?;
        Ok((f + g * DVector::from_column_slice(u)).as_slice().to_vec())
    }

    fn output(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.h.eval(x)
    }

    fn ydot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let xd = self.xdot(x, u)?;
        let jh = self.jac_h.eval(x)?;
        Ok((jh.transpose() * DVector::from_vec(xd)).as_slice().to_vec())
    }
}

impl Plant for SystemModel {
    fn n(&self) -> usize {
        SystemModel::n(self)
    }

    fn xdot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        match self {
            SystemModel::Lti(s) => s.xdot(x, u),
            SystemModel::Affine(s) => s.xdot(x, u),
        }
    }

    fn output(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        match self {
            SystemModel::Lti(s) => s.output(x),
            SystemModel::Affine(s) => s.output(x),
        }
    }

    fn ydot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        match self {
            SystemModel::Lti(s) => s.ydot(x, u),
            SystemModel::Affine(s) => s.ydot(x, u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSignal {
    Zero,
    /// `values[k]` holds on `[breakpoints[k], breakpoints[k+1])`; the first
    /// breakpoint must be 0.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    /// Channel `i` is the sum of its sinusoids.
    Sinusoids {
        channels: Vec<Vec<Sinusoid>>,
    },
}

impl InputSignal {
    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        match self {
            InputSignal::Zero => Ok(()),
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(SimError::Invalid(
                        "piecewise-constant input needs one value per breakpoint".into(),
                    ));
                }
                if breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(SimError::Invalid(
                        "breakpoints must start at 0 and increase strictly".into(),
                    ));
                }
                for v in values {
                    if v.len() != n {
                        return Err(SimError::Dimension {
                            expected: n,
                            got: v.len(),
                        });
                    }
                    if v.iter().any(|c| !c.is_finite()) {
                        return Err(SimError::Invalid("non-finite input value".into()));
                    }
                }
                Ok(())
            }
            InputSignal::Sinusoids { channels } => {
                if channels.len() != n {
                    return Err(SimError::Dimension {
                        expected: n,
                        got: channels.len(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Value holding from `t` onwards.
    pub fn at(&self, t: f64, n: usize) -> Vec<f64> {
        match self {
            InputSignal::Zero => vec![0.0; n],
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                let k = breakpoints.partition_point(|&b| b <= t + snap(t)).max(1) - 1;
                values[k].clone()
            }
            InputSignal::Sinusoids { channels } => channels
                .iter()
                .map(|ch| ch.iter().map(|s| s.amplitude * (s.frequency * t + s.phase).sin()).sum())
                .collect(),
        }
    }

    /// Left limit at `t` (equal to [`InputSignal::at`] except at breakpoints).
    pub fn left(&self, t: f64, n: usize) -> Vec<f64> {
        match self {
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                let k = breakpoints.partition_point(|&b| b < t - snap(t)).max(1) - 1;
                values[k].clone()
            }
            _ => self.at(t, n),
        }
    }
}

/// Times this close to a breakpoint count as the breakpoint, so `k·dt`
/// rounding cannot move a switch by a whole step.
fn snap(t: f64) -> f64 {
    16.0 * f64::EPSILON * (1.0 + t.abs())
}

/// Unit sinusoids on one channel at a time, for every frequency and phase.
pub fn sinusoid_sweep(n: usize, frequencies: &[f64], phases: &[f64]) -> Vec<InputSignal> {
    let mut out = Vec::new();
    for ch in 0..n {
        for &w in frequencies {
            for &ph in phases {
                let mut channels = vec![Vec::new(); n];
                channels[ch].push(Sinusoid {
                    amplitude: 1.0,
                    frequency: w,
                    phase: ph,
                });
                out.push(InputSignal::Sinusoids { channels });
            }
        }
    }
    out
}

/// Seeded piecewise-constant input with `segments` equal pieces on
/// `[0, t_end)` and entries uniform in `[−amplitude, amplitude]`.
pub fn random_piecewise(n: usize, segments: usize, t_end: f64, amplitude: f64, seed: u64) -> InputSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segments = segments.max(1);
    let breakpoints = (0..segments).map(|k| t_end * k as f64 / segments as f64).collect();
    let values = (0..segments)
        .map(|_| (0..n).map(|_| rng.random_range(-amplitude..=amplitude)).collect())
        .collect();
    InputSignal::PiecewiseConstant { breakpoints, values }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Input applied from `t_k` onwards.
    pub inputs: Vec<Vec<f64>>,
    /// Input arriving at `t_k` (left limit).
    pub inputs_left: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// `ẏ(t_k⁺)`.
    pub ydots: Vec<Vec<f64>>,
    /// `ẏ(t_k⁻)`.
    pub ydots_left: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest deviation of the recorded `ẏ` from a recomputation.
    pub fn ydot_consistency(&self, plant: &impl Plant) -> Result<f64, EvalError> {
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let yd = plant.ydot(&self.states[k], &self.inputs[k])?;
            for (a, b) in yd.iter().zip(&self.ydots[k]) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

fn check_params(dt: f64, t_end: f64) -> Result<usize, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Invalid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(SimError::Invalid(format!("t_end must be at least dt, got {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

fn axpy(x: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Input law: `u(t, x)` from the right and its left limit.
trait InputLaw {
    fn right(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, EvalError>;
    fn left(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, EvalError>;
}

struct OpenLoop<'a> {
    signal: &'a InputSignal,
    n: usize,
}

impl InputLaw for OpenLoop<'_> {
    fn right(&self, t: f64, _x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.signal.at(t, self.n))
    }

    fn left(&self, t: f64, _x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.signal.left(t, self.n))
    }
}

struct OutputFeedback<'a, P: Plant> {
    plant: &'a P,
    k: &'a DMatrix<f64>,
}

impl<P: Plant> InputLaw for OutputFeedback<'_, P> {
    fn right(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let y = self.plant.output(x)?;
        Ok(mat_vec(self.k, &y).as_slice().to_vec())
    }

    fn left(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.right(t, x)
    }
}

fn run<P: Plant, L: InputLaw>(plant: &P, law: &L, x0: &[f64], dt: f64, steps: usize) -> Result<Trajectory, SimError> {
    let n = plant.n();
    if x0.len() != n {
        return Err(SimError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        inputs_left: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
        ydots: Vec::with_capacity(steps + 1),
        ydots_left: Vec::with_capacity(steps + 1),
    };
    let wrap = |t: f64| move |e: EvalError| SimError::Eval { t, source: e };
    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let u = law.right(t, &x).map_err(wrap(t))?;
        let ul = if k == 0 {
            u.clone()
        } else {
            law.left(t, &x).map_err(wrap(t))?
        };
        traj.outputs.push(plant.output(&x).map_err(wrap(t))?);
        traj.ydots.push(plant.ydot(&x, &u).map_err(wrap(t))?);
        traj.ydots_left.push(if ul == u {
            traj.ydots[k].clone()
        } else {
            plant.ydot(&x, &ul).map_err(wrap(t))?
        });
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.inputs.push(u.clone());
        traj.inputs_left.push(ul);
        if k == steps {
            break;
        }
        // classical RK4; the end stage uses the left limit at t + dt
        let th = t + 0.5 * dt;
        let t1 = (k + 1) as f64 * dt;
        let k1 = plant.xdot(&x, &u).map_err(wrap(t))?;
        let x2 = axpy(&x, &k1, 0.5 * dt);
        let k2 = plant
            .xdot(&x2, &law.right(th, &x2).map_err(wrap(th))?)
            .map_err(wrap(th))?;
        let x3 = axpy(&x, &k2, 0.5 * dt);
        let k3 = plant
            .xdot(&x3, &law.right(th, &x3).map_err(wrap(th))?)
            .map_err(wrap(th))?;
        let x4 = axpy(&x, &k3, dt);
        let k4 = plant
            .xdot(&x4, &law.left(t1, &x4).map_err(wrap(t1))?)
            .map_err(wrap(t1))?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let nx = norm(&x);
        if nx.is_nan() || nx > DIVERGENCE_GUARD {
            return Err(SimError::Diverged {
                t: t1,
                guard: DIVERGENCE_GUARD,
            });
        }
    }
    Ok(traj)
}

/// Open-loop run from `x0` over `[0, t_end]`.
pub fn integrate<P: Plant>(
    plant: &P,
    u: &InputSignal,
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, SimError> {
    let steps = check_params(dt, t_end)?;
    u.validate(plant.n())?;
    run(
        plant,
        &OpenLoop {
            signal: u,
            n: plant.n(),
        },
        x0,
        dt,
        steps,
    )
}

/// Closed-loop run under `u = Ky`.
pub fn integrate_feedback<P: Plant>(
    plant: &P,
    k: &DMatrix<f64>,
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, SimError> {
    let steps = check_params(dt, t_end)?;
    let n = plant.n();
    if k.nrows() != n || k.ncols() != n {
        return Err(SimError::Dimension {
            expected: n,
            got: k.nrows(),
        });
    }
    run(plant, &OutputFeedback { plant, k }, x0, dt, steps)
}

/// Running values of `V(x_k) − V(x_0) − ∫₀^{t_k} ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub storage: Vec<f64>,
    pub supplied: Vec<f64>,
    pub violation: Vec<f64>,
    pub max_violation: f64,
    pub max_at: f64,
}

pub fn audit_dissipation(
    traj: &Trajectory,
    supply: &dyn SupplyIntegrand,
    v: &StorageCandidate,
) -> Result<Audit, EvalError> {
    let m = traj.len();
    let mut storage = Vec::with_capacity(m);
    let mut supplied = Vec::with_capacity(m);
    let mut violation = Vec::with_capacity(m);
    let v0 = v.value(&traj.states[0])?;
    let mut integral = 0.0;
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_at = 0.0;
    for k in 0..m {
        if k > 0 {
            let w0 = supply.rate(&traj.inputs[k - 1], &traj.outputs[k - 1], &traj.ydots[k - 1]);
            let w1 = supply.rate(&traj.inputs_left[k], &traj.outputs[k], &traj.ydots_left[k]);
            integral += 0.5 * traj.dt * (w0 + w1);
        }
        let vk = v.value(&traj.states[k])?;
        let viol = vk - v0 - integral;
        if viol > max_violation {
            max_violation = viol;
            max_at = traj.times[k];
        }
        storage.push(vk);
        supplied.push(integral);
        violation.push(viol);
    }
    Ok(Audit {
        storage,
        supplied,
        violation,
        max_violation,
        max_at,
    })
}

/// Trapezoidal `∫ ‖·‖²` pairing right values with the next left limits.
fn energy(dt: f64, right: &[Vec<f64>], left: &[Vec<f64>]) -> f64 {
    let sq = |v: &Vec<f64>| v.iter().map(|c| c * c).sum::<f64>();
    (1..right.len())
        .map(|k| 0.5 * dt * (sq(&right[k - 1]) + sq(&left[k])))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainEstimate {
    /// `max ‖y‖/‖u‖` over the ensemble.
    pub gain: f64,
    /// Ensemble index achieving it.
    pub argmax: Option<usize>,
    /// Ratio per ensemble member; `None` for zero-energy inputs.
    pub ratios: Vec<Option<f64>>,
}

/// Lower bound on the L2 gain from zero initial state.
pub fn empirical_l2_gain<P: Plant>(
    plant: &P,
    ensemble: &[InputSignal],
    dt: f64,
    t_end: f64,
) -> Result<GainEstimate, SimError> {
    let n = plant.n();
    let x0 = vec![0.0; n];
    let ratios: Vec<Result<Option<f64>, SimError>> = crate::thread_pool().install(|| {
        ensemble
            .par_iter()
            .map(|u| {
                let traj = integrate(plant, u, &x0, dt, t_end)?;
                let eu = energy(dt, &traj.inputs, &traj.inputs_left);
                if eu <= 0.0 {
                    return Ok(None);
                }
                let ey = energy(dt, &traj.outputs, &traj.outputs);
                Ok(Some((ey / eu).sqrt()))
            })
            .collect()
    });
    let ratios: Vec<Option<f64>> = ratios.into_iter().collect::<Result<_, _>>()?;
    let mut gain = 0.0;
    let mut argmax = None;
    for (i, r) in ratios.iter().enumerate() {
        if let Some(r) = r {
            if argmax.is_none() || *r > gain {
                gain = *r;
                argmax = Some(i);
            }
        }
    }
    Ok(GainEstimate { gain, argmax, ratios })
}

/// CSV with columns `t, x…, u…, y…, ydot…, V, int_omega, violation`.
pub fn write_csv(out: &mut dyn Write, traj: &Trajectory, audit: Option<&Audit>) -> std::io::Result<()> {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    for prefix in ["x", "u", "y", "ydot"] {
        header.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    header.extend(["V", "int_omega", "violation"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for k in 0..traj.len() {
        let mut row = vec![format!("{}", traj.times[k])];
        for v in [&traj.states[k], &traj.inputs[k], &traj.outputs[k], &traj.ydots[k]] {
            row.extend(v.iter().map(|c| format!("{c}")));
        }
        match audit {
            Some(a) => {
                row.push(format!("{}", a.storage[k]));
                row.push(format!("{}", a.supplied[k]));
                row.push(format!("{}", a.violation[k]));
            }
            None => row.extend(["", "", ""].map(String::from)),
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

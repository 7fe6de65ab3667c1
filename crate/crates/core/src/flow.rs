//! Gradient-flow relaxation of the action over projections.
//!
//! Each step moves along the tangent vector `(1−p) X p + p X (1−p)` built
//! from `X = −Δp`, which equals `−[p, [p, Δp]]`; the Laplacian is negative
//! semidefinite, so `p − t G` lowers the action to first order. Candidates are
//! pulled back onto the projection manifold by purification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::retract;
use crate::conformal::ConformalStructure;
use crate::error::{Error, Result};
use crate::random::random_series;
use crate::sigma::{action_metric_form, charge_raw, require_projection};
use crate::tolerances::Tolerances;
use crate::twisted::TwistedSeries;

/// Purification iterations allowed per retraction.
const RETRACT_ITERS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Initial (and largest) flow-time increment.
    pub step: f64,
    pub max_steps: usize,
    pub purify_every: usize,
    pub stop_grad_tol: f64,
    /// Steps are halved on rejection until they fall below this floor.
    pub min_step: f64,
    pub cs: ConformalStructure,
    pub tolerances: Tolerances,
}

/// Explicit Euler is stable on the window when `dt·|Δ| ≲ 1`; this returns
/// half the reciprocal of the largest Laplacian eigenvalue on it.
pub fn stable_step(window: usize, cs: &ConformalStructure) -> f64 {
    let w = window as i64;
    let mut top = 0.0f64;
    for m in -w..=w {
        for n in -w..=w {
            top = top.max(cs.laplacian_symbol(m, n).abs());
        }
    }
    if top == 0.0 {
        1.0
    } else {
        0.5 / top
    }
}

impl FlowConfig {
    pub fn new(step: f64, max_steps: usize, cs: ConformalStructure) -> Result<Self> {
        let cfg = Self {
            step,
            max_steps,
            purify_every: 1,
            stop_grad_tol: 1e-6,
            min_step: 1e-12,
            cs,
            tolerances: Tolerances::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Parameter(format!("flow step must be positive, got {}", self.step)));
        }
        if self.purify_every == 0 {
            return Err(Error::Parameter("purify_every must be at least 1".into()));
        }
        if !(self.min_step > 0.0) || self.min_step > self.step {
            return Err(Error::Parameter(format!(
                "step floor {} must lie in (0, step]",
                self.min_step
            )));
        }
        if !(self.stop_grad_tol >= 0.0) {
            return Err(Error::Parameter("stop_grad_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub step: usize,
    /// Flow-time increment that produced this state (0 for the start).
    pub dt: f64,
    pub action: f64,
    pub charge_raw: f64,
    /// ℓ¹ norm of `[p, Δp]`, an upper bound for its operator norm.
    pub eom_residual: f64,
    /// `S − 2|charge_raw|`.
    pub bp_gap: f64,
    /// ℓ¹ norm of `p² − p` (window-truncated product).
    pub idempotency_residual: f64,
    /// ℓ¹ norm of the descent direction at this state.
    pub grad_norm: f64,
}

impl FlowRecord {
    pub const CSV_HEADER: &'static str =
        "step,dt,action,charge_raw,eom_residual,bp_gap,idempotency_residual,grad_norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.step,
            self.dt,
            self.action,
            self.charge_raw,
            self.eom_residual,
            self.bp_gap,
            self.idempotency_residual,
            self.grad_norm
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlowStatus {
    Converged,
    BudgetExhausted,
    StepFloor,
    Aborted { reason: String },
}

/// Accepted states of a relaxation, starting with the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
    pub rejected: usize,
    pub status: FlowStatus,
}

impl FlowTrace {
    pub fn csv(&self) -> String {
        let mut out = String::from(FlowRecord::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// Largest increase of the action between consecutive records.
    pub fn max_action_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].action - w[0].action)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    /// Largest deviation of the raw charge from its initial value.
    pub fn charge_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .map(|r| (r.charge_raw - first.charge_raw).abs())
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> Option<&FlowRecord> {
        self.records.last()
    }
}

fn truncate(a: TwistedSeries, window: usize) -> TwistedSeries {
    a.resized(window).0
}

/// `(1−p) X p + p X (1−p)` with `X = −Δp`, truncated to the window of `p`.
pub fn descent_direction(p: &TwistedSeries, cs: &ConformalStructure) -> Result<TwistedSeries> {
    let w = p.half_width();
    let x = p.laplacian(cs).scale_real(-1.0);
    let xp = x.multiply_full(p)?;
    let pxp = p.multiply_full(&xp)?;
    let px = p.multiply_full(&x)?;
    // (1−p)Xp + pX(1−p) = Xp + pX − 2pXp
    let g = xp.checked_add(&px)?.checked_sub(&pxp.scale_real(2.0))?;
    Ok(truncate(g, w))
}

/// The same direction written as the double bracket `−[p, [p, Δp]]`.
pub fn descent_direction_bracket(
    p: &TwistedSeries,
    cs: &ConformalStructure,
) -> Result<TwistedSeries> {
    let inner = p.commutator(&p.laplacian(cs))?;
    Ok(truncate(p.commutator(&inner)?.scale_real(-1.0), p.half_width()))
}

fn retract_with(a: &TwistedSeries, tol: &Tolerances) -> Result<TwistedSeries> {
    Ok(retract(a, RETRACT_ITERS, tol.purify, tol.projection_input)?.projection)
}

fn record(
    p: &TwistedSeries,
    cs: &ConformalStructure,
    step: usize,
    dt: f64,
    grad_norm: f64,
) -> Result<FlowRecord> {
    let action = action_metric_form(p, cs)?;
    let charge = charge_raw(p)?.raw;
    Ok(FlowRecord {
        step,
        dt,
        action,
        charge_raw: charge,
        eom_residual: p.commutator(&p.laplacian(cs))?.l1_norm(),
        bp_gap: action - 2.0 * charge.abs(),
        idempotency_residual: (&p.multiply(p)?.0 - p).l1_norm(),
        grad_norm,
    })
}

/// Outcome of a single attempted step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub projection: TwistedSeries,
    pub accepted: bool,
    pub action: f64,
}

/// One explicit Euler step of size `dt` from `p`, optionally retracted onto
/// the projections; accepted iff the action decreases.
pub fn flow_step(
    p: &TwistedSeries,
    g: &TwistedSeries,
    dt: f64,
    retract: bool,
    cfg: &FlowConfig,
) -> Result<StepResult> {
    let current = action_metric_form(p, &cfg.cs)?;
    let mut cand = p.checked_sub(&g.scale_real(dt))?.hermitian_part();
    if retract {
        // a candidate too far from the projections to retract is a
        // rejection, not a failure of the flow
        match retract_with(&cand, &cfg.tolerances) {
            Ok(r) => cand = r,
            Err(Error::NotProjection(_) | Error::NoConvergence { .. }) => {
                return Ok(StepResult {
                    projection: p.clone(),
                    accepted: false,
                    action: current,
                })
            }
            Err(e) => return Err(e),
        }
    }
    let action = action_metric_form(&cand, &cfg.cs)?;
    let accepted = action < current;
    Ok(StepResult {
        projection: if accepted { cand } else { p.clone() },
        accepted,
        action: if accepted { action } else { current },
    })
}

/// Relaxes `p0` until the descent direction is below `stop_grad_tol` (ℓ¹),
/// the step budget runs out, or step halving reaches the floor.
pub fn relax(p0: &TwistedSeries, cfg: &FlowConfig) -> Result<(TwistedSeries, FlowTrace)> {
    cfg.validate()?;
    require_projection(p0, cfg.tolerances.projection_input)?;
    let mut p = p0.clone();
    let mut g = descent_direction(&p, &cfg.cs)?;
    let mut trace = FlowTrace {
        records: vec![record(&p, &cfg.cs, 0, 0.0, g.l1_norm())?],
        rejected: 0,
        status: FlowStatus::BudgetExhausted,
    };
    let mut dt = cfg.step;
    let mut accepted_steps = 0usize;
    let mut attempts = 0usize;
    loop {
        if g.l1_norm() <= cfg.stop_grad_tol {
            trace.status = FlowStatus::Converged;
            break;
        }
        if attempts == cfg.max_steps {
            break;
        }
        attempts += 1;
        let retract = (accepted_steps + 1) % cfg.purify_every == 0;
        let out = match flow_step(&p, &g, dt, retract, cfg) {
            Ok(out) => out,
            Err(e) => {
                trace.status = FlowStatus::Aborted {
                    reason: e.to_string(),
                };
                break;
            }
        };
        if !out.accepted {
            trace.rejected += 1;
            dt *= 0.5;
            if dt < cfg.min_step {
                trace.status = FlowStatus::StepFloor;
                break;
            }
            continue;
        }
        accepted_steps += 1;
        p = out.projection;
        g = descent_direction(&p, &cfg.cs)?;
        trace
            .records
            .push(record(&p, &cfg.cs, accepted_steps, dt, g.l1_norm())?);
        // regrow cautiously after successful steps
        dt = (dt * 1.25).min(cfg.step);
    }
    if cfg.purify_every > 1 && accepted_steps % cfg.purify_every != 0 {
        p = retract_with(&p, &cfg.tolerances)?;
    }
    Ok((p, trace))
}

/// Kicks a projection along a random tangent direction
/// `(1−p) z p + p z* (1−p)` of ℓ¹ size `amplitude`, then purifies.
pub fn perturb<R: Rng + ?Sized>(
    p: &TwistedSeries,
    rng: &mut R,
    amplitude: f64,
    radius: usize,
    tol: &Tolerances,
) -> Result<TwistedSeries> {
    require_projection(p, tol.projection_input)?;
    let w = p.half_width();
    let z = random_series(rng, p.theta(), w, radius, 1.0);
    let zp = z.multiply_full(p)?;
    let pzp = p.multiply_full(&zp)?;
    let tangent = zp.checked_sub(&pzp)?;
    // (1−p)zp plus its adjoint p z* (1−p)
    let kick = truncate(tangent.checked_add(&tangent.adjoint())?, w);
    let size = kick.l1_norm();
    if size == 0.0 {
        return Ok(p.clone());
    }
    let cand = p.checked_add(&kick.scale_real(amplitude / size))?;
    retract_with(&cand, tol)
}

//! Pseudo duality gap with a dynamically grown artificial bound, decibel
//! reporting, ergodic averages, and empirical rate fitting.
//!
//! When the forward operator has a nontrivial null space the plain duality
//! gap is numerically infinite. The pseudo gap is the gap of the problem
//! augmented with the artificial constraint `||P_perp x|| <= M`; `M` is
//! grown along the run so the constraint is never active at evaluation
//! points, which keeps the gap finite and meaningful.

use nalgebra::{DMatrix, DVector};

use crate::error::{PdError, PdResult};
use crate::grid::fft::Fft2;
use crate::grid::{GridField, StackedVar};
use crate::linop::{grad, grad_adjoint, symgrad, symgrad_adjoint, Projector};
use crate::schedules::StepState;

/// Relative tolerance for dual-ball feasibility; iterates land on the ball
/// by construction, so violations beyond rounding signal a solver bug.
const FEAS_TOL: f64 = 1e-9;

/// Result of a pseudo-gap evaluation.
#[derive(Clone, Copy, Debug)]
pub struct GapValue {
    pub value: f64,
    /// Set when the gap came out negative beyond rounding, which happens
    /// when M fails to dominate ||P_perp x||.
    pub m_too_small: bool,
}

/// Closed-form gap evaluator for one problem family.
pub enum GapEvaluator {
    Denoise {
        f: GridField,
        alpha: f64,
    },
    Deblur {
        f_hat: GridField,
        a_hat: GridField,
        a_gap: GridField,
        supp: Vec<bool>,
        alpha: f64,
        fft: Fft2,
    },
    Inpaint {
        f: GridField,
        mask: Vec<bool>,
        alpha: f64,
    },
    Tgv2 {
        f: GridField,
        alpha: f64,
        beta: f64,
    },
    Lasso {
        basis: DMatrix<f64>,
        singulars: DVector<f64>,
        utf: DVector<f64>,
        /// ||f - U U^T f||^2, the part of the data outside range(A).
        f_residual_sq: f64,
        a: DMatrix<f64>,
        f: DVector<f64>,
        alpha: f64,
    },
}

fn ball_excess(y: &GridField, radius: f64) -> f64 {
    (y.magnitude_linf() - radius * (1.0 + FEAS_TOL)).max(0.0)
}

impl GapEvaluator {
    /// Primal objective with the unmodified operator; the quantity reported
    /// as "value" against the target solution.
    pub fn primal_value(&self, x: &StackedVar) -> f64 {
        match self {
            GapEvaluator::Denoise { f, alpha } => {
                let mut r = x.part(0).clone();
                r.add_scaled(-1.0, f);
                0.5 * r.norm_sq() + alpha * grad(x.part(0)).magnitude_l1()
            }
            GapEvaluator::Deblur { f_hat, a_hat, alpha, fft, .. } => {
                let xhat = fft.forward(x.part(0)).expect("scalar primal");
                let mut fid = 0.0;
                for ((xv, av), fv) in
                    xhat.complex().iter().zip(a_hat.complex()).zip(f_hat.complex())
                {
                    fid += (fv - av * xv).norm_sqr();
                }
                0.5 * fid + alpha * grad(x.part(0)).magnitude_l1()
            }
            GapEvaluator::Inpaint { f, mask, alpha } => {
                let mut fid = 0.0;
                for (i, (&xv, &fv)) in x.part(0).real().iter().zip(f.real()).enumerate() {
                    if mask[i] {
                        fid += (fv - xv) * (fv - xv);
                    }
                }
                0.5 * fid + alpha * grad(x.part(0)).magnitude_l1()
            }
            GapEvaluator::Tgv2 { f, alpha, beta } => {
                let (u, w) = (x.part(0), x.part(1));
                let mut r = u.clone();
                r.add_scaled(-1.0, f);
                let mut gu = grad(u);
                gu.add_scaled(-1.0, w);
                0.5 * r.norm_sq() + alpha * gu.magnitude_l1() + beta * symgrad(w).magnitude_l1()
            }
            GapEvaluator::Lasso { a, f, alpha, .. } => {
                let xv = DVector::from_column_slice(x.part(0).real());
                let r = f - a * &xv;
                0.5 * r.norm_squared() + alpha * xv.iter().map(|v| v.abs()).sum::<f64>()
            }
        }
    }

    /// Negative of the primal part minus the conjugate of -K* y acting
    /// through the M-constrained fidelity; together with the primal value
    /// this is the pseudo duality gap. Fails when the dual iterate lies
    /// outside its constraint set beyond tolerance.
    pub fn pseudo_gap(&self, x: &StackedVar, y: &StackedVar, m: f64) -> PdResult<GapValue> {
        if m <= 0.0 {
            return Err(PdError::Invalid("artificial bound M must be positive".into()));
        }
        let gap = match self {
            GapEvaluator::Denoise { f, alpha } => {
                let excess = ball_excess(y.part(0), *alpha);
                if excess > 0.0 {
                    return Err(PdError::DualInfeasible { excess });
                }
                let z = grad_adjoint(y.part(0)).scaled(-1.0);
                self.primal_value(x) + 0.5 * z.norm_sq() + z.inner(f)
            }
            GapEvaluator::Deblur { f_hat, a_gap, supp, alpha, fft, .. } => {
                let excess = ball_excess(y.part(0), *alpha);
                if excess > 0.0 {
                    return Err(PdError::DualInfeasible { excess });
                }
                // Gap-side primal with the zeroed spectrum.
                let xhat = fft.forward(x.part(0)).expect("scalar primal");
                let mut fid = 0.0;
                for ((xv, av), fv) in
                    xhat.complex().iter().zip(a_gap.complex()).zip(f_hat.complex())
                {
                    fid += (fv - av * xv).norm_sqr();
                }
                let primal = 0.5 * fid + alpha * grad(x.part(0)).magnitude_l1();

                let z = grad_adjoint(y.part(0)).scaled(-1.0);
                let zhat = fft.forward(&z).expect("scalar dual image");
                let mut dual = 0.0;
                let mut off_energy = 0.0;
                for ((zv, av), (fv, &inside)) in zhat
                    .complex()
                    .iter()
                    .zip(a_gap.complex())
                    .zip(f_hat.complex().iter().zip(supp))
                {
                    if inside {
                        let a2 = av.norm_sqr();
                        dual += 0.5 * zv.norm_sqr() / a2
                            + (zv.conj() * av.conj() * fv).re / a2;
                    } else {
                        // The fidelity is constant here; its conjugate
                        // contributes the ball support function minus that
                        // constant.
                        dual -= 0.5 * fv.norm_sqr();
                        off_energy += zv.norm_sqr();
                    }
                }
                dual += m * off_energy.sqrt();
                primal + dual
            }
            GapEvaluator::Inpaint { f, mask, alpha } => {
                let excess = ball_excess(y.part(0), *alpha);
                if excess > 0.0 {
                    return Err(PdError::DualInfeasible { excess });
                }
                let z = grad_adjoint(y.part(0)).scaled(-1.0);
                let mut dual = 0.0;
                let mut off = 0.0;
                for (i, (&zv, &fv)) in z.real().iter().zip(f.real()).enumerate() {
                    if mask[i] {
                        dual += 0.5 * zv * zv + zv * fv;
                    } else {
                        off += zv * zv;
                    }
                }
                dual += m * off.sqrt();
                self.primal_value(x) + dual
            }
            GapEvaluator::Tgv2 { f, alpha, beta } => {
                let e1 = ball_excess(y.part(0), *alpha);
                let e2 = ball_excess(y.part(1), *beta);
                if e1 > 0.0 || e2 > 0.0 {
                    return Err(PdError::DualInfeasible { excess: e1.max(e2) });
                }
                // -K*(y1, y2) = (-grad* y1, y1 - symgrad* y2)
                let zu = grad_adjoint(y.part(0)).scaled(-1.0);
                let mut zw = symgrad_adjoint(y.part(1)).scaled(-1.0);
                zw.add_scaled(1.0, y.part(0));
                self.primal_value(x) + 0.5 * zu.norm_sq() + zu.inner(f) + m * zw.norm()
            }
            GapEvaluator::Lasso { basis, singulars, utf, f_residual_sq, alpha, .. } => {
                let worst =
                    y.part(0).real().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let excess = (worst - alpha * (1.0 + FEAS_TOL)).max(0.0);
                if excess > 0.0 {
                    return Err(PdError::DualInfeasible { excess });
                }
                let z = DVector::from_column_slice(y.part(0).real()).scale(-1.0);
                let coeff = basis.transpose() * &z;
                let z_null = &z - basis * &coeff;
                let mut dual = -0.5 * f_residual_sq + m * z_null.norm();
                for k in 0..coeff.len() {
                    let s = singulars[k];
                    dual += 0.5 * coeff[k] * coeff[k] / (s * s) + coeff[k] * utf[k] / s;
                }
                self.primal_value(x) + dual
            }
        };
        let scale = 1.0 + self.primal_value(x).abs();
        Ok(GapValue { value: gap, m_too_small: gap < -1e-8 * scale })
    }
}

/// Free-function form of the gap evaluation on a built problem.
pub fn pseudo_gap(
    problem: &crate::solver::SaddleProblem,
    x: &StackedVar,
    y: &StackedVar,
    m: f64,
) -> PdResult<GapValue> {
    problem.gap.pseudo_gap(x, y, m)
}

/// Dynamic artificial-bound state plus the ergodic accumulators.
#[derive(Clone, Debug)]
pub struct GapState {
    m: f64,
    safety: f64,
    m_history: Vec<f64>,
    x_acc: Option<StackedVar>,
    y_acc: Option<StackedVar>,
    qtilde: f64,
    qhat: f64,
}

impl GapState {
    /// `safety` > 1 keeps the artificial constraint inactive at the points
    /// where the gap is evaluated.
    pub fn new(safety: f64) -> Self {
        GapState {
            m: f64::MIN_POSITIVE,
            safety,
            m_history: Vec::new(),
            x_acc: None,
            y_acc: None,
            qtilde: 0.0,
            qhat: 0.0,
        }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn m_history(&self) -> &[f64] {
        &self.m_history
    }

    pub fn qtilde(&self) -> f64 {
        self.qtilde
    }

    /// Grows M to cover the current residual component: M is never
    /// decreased, so it is the running maximum over all evaluations.
    pub fn update_m(&mut self, x: &StackedVar, p: &Projector) {
        self.m = self.m.max(self.safety * p.perp_norm(x));
        self.m_history.push(self.m);
    }

    /// Merges the bound from another run (the cross-run maximum).
    pub fn merge_m(&mut self, other_m: f64) {
        self.m = self.m.max(other_m);
    }

    /// Accumulates the step-weighted ergodic sums. `x1`, `y1` are the
    /// iterates produced with the step state `st`; the primal weight is
    /// 1/tau_tilde_i and the dual weight 1/tau_tilde_{i+1}.
    pub fn ergodic_update(&mut self, x1: &StackedVar, y1: &StackedVar, st: &StepState) {
        let wx = 1.0 / st.tau_tilde;
        let wy = 1.0 / st.tau_tilde_next;
        match &mut self.x_acc {
            Some(acc) => acc.add_scaled(wx, x1),
            None => self.x_acc = Some(x1.scaled(wx)),
        }
        match &mut self.y_acc {
            Some(acc) => acc.add_scaled(wy, y1),
            None => self.y_acc = Some(y1.scaled(wy)),
        }
        self.qtilde += wx;
        self.qhat += wy;
    }

    /// The weighted primal average, once at least one iterate was fed.
    pub fn x_avg(&self) -> Option<StackedVar> {
        self.x_acc.as_ref().map(|acc| acc.scaled(1.0 / self.qtilde))
    }

    pub fn y_avg(&self) -> Option<StackedVar> {
        self.y_acc.as_ref().map(|acc| acc.scaled(1.0 / self.qhat))
    }
}

/// 10 log10(v^2 / v0^2), with a -infinity sentinel at v = 0.
pub fn decibels(v: f64, v0: f64) -> PdResult<f64> {
    if v0 == 0.0 {
        return Err(PdError::Invalid("decibel reference must be nonzero".into()));
    }
    if v == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (v * v / (v0 * v0)).log10())
}

/// Least-squares slope of log(value) against log(N). Non-positive samples
/// are excluded; at least 10 must remain.
pub fn fit_rate(series: &[(f64, f64)]) -> PdResult<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, v)| *n > 0.0 && *v > 0.0)
        .map(|(n, v)| (n.ln(), v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(PdError::Invalid(format!(
            "rate fit needs at least 10 positive samples, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(PdError::Invalid("rate fit needs at least two distinct N".into()));
    }
    Ok(sxy / sxx)
}

/// One metrics row of a run.
#[derive(Clone, Copy, Debug)]
pub struct RecordRow {
    pub iter: usize,
    pub time_s: f64,
    pub gap_db: f64,
    pub target_db: f64,
    pub value_db: f64,
    pub tau: f64,
    pub tau_perp: f64,
    pub sigma: f64,
    pub m: f64,
}

/// Metrics time series of one run.
#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub rows: Vec<RecordRow>,
}

impl RunRecord {
    pub fn push(&mut self, row: RecordRow) {
        if let Some(last) = self.rows.last() {
            debug_assert!(row.iter > last.iter, "iterations must increase");
            debug_assert!(row.time_s >= last.time_s, "wall time must not decrease");
        }
        self.rows.push(row);
    }

    /// First row (at the evaluation stride) whose metric is at or below the
    /// threshold; `metric` selects the column.
    pub fn first_at_or_below(
        &self,
        threshold: f64,
        metric: impl Fn(&RecordRow) -> f64,
    ) -> Option<&RecordRow> {
        self.rows.iter().find(|r| metric(r) <= threshold)
    }
}

/// Writes a run record as CSV with 12 significant digits.
pub fn write_run_csv(path: impl AsRef<std::path::Path>, record: &RunRecord) -> PdResult<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iter,time_s,gap_db,target_db,value_db,tau,tau_perp,sigma,M")?;
    for r in &record.rows {
        writeln!(
            out,
            "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            r.iter, r.time_s, r.gap_db, r.target_db, r.value_db, r.tau, r.tau_perp, r.sigma, r.m
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FieldKind;
    use crate::schedules::{Schedule, ScheduleParams, Variant};

    #[test]
    fn decibel_examples() {
        assert_eq!(decibels(3.0, 3.0).unwrap(), 0.0);
        assert!((decibels(0.3, 3.0).unwrap() + 20.0).abs() <= 1e-12);
        assert!((decibels(300.0, 3.0).unwrap() - 40.0).abs() <= 1e-12);
        assert_eq!(decibels(0.0, 3.0).unwrap(), f64::NEG_INFINITY);
        assert!(decibels(1.0, 0.0).is_err());
    }

    #[test]
    fn fit_rate_recovers_power_laws() {
        let quad: Vec<(f64, f64)> = (10..200).map(|n| (n as f64, 7.0 / (n * n) as f64)).collect();
        assert!((fit_rate(&quad).unwrap() + 2.0).abs() <= 0.01);

        let lin: Vec<(f64, f64)> = (10..200).map(|n| (n as f64, 0.3 / n as f64)).collect();
        assert!((fit_rate(&lin).unwrap() + 1.0).abs() <= 0.01);

        // A mixture decays between the two pure rates.
        let mix: Vec<(f64, f64)> = (10..200)
            .map(|n| {
                let nf = n as f64;
                (nf, 2.0 / (nf * nf) + 2.0 / nf)
            })
            .collect();
        let slope = fit_rate(&mix).unwrap();
        assert!(slope > -2.0 && slope < -1.0, "mixture slope {slope}");

        assert!(fit_rate(&[(1.0, 1.0); 5]).is_err());
    }

    #[test]
    fn update_m_semantics() {
        let p = Projector::PixelMask { mask: vec![true, true, false, false] };
        let x = StackedVar::single(
            GridField::from_real(2, 2, FieldKind::Scalar, vec![9.0, 9.0, 3.0, 4.0]).unwrap(),
        );
        let mut gs = GapState::new(1.0);
        gs.update_m(&x, &p);
        // Exactly tracks the residual norm with safety 1.
        assert!((gs.m() - 5.0).abs() <= 1e-12);
        // Never decreases.
        let small = x.scaled(0.1);
        gs.update_m(&small, &p);
        assert!((gs.m() - 5.0).abs() <= 1e-12);
        // Unchanged when ||P_perp x|| <= M / safety.
        let mut gs2 = GapState::new(1.5);
        gs2.update_m(&x, &p);
        assert!((gs2.m() - 7.5).abs() <= 1e-12);
        gs2.update_m(&x, &p);
        assert!((gs2.m() - 7.5).abs() <= 1e-12);
        // Merging runs takes the pairwise maximum.
        gs2.merge_m(9.0);
        assert!((gs2.m() - 9.0).abs() <= 1e-12);
        assert_eq!(gs.m_history().len(), 2);
    }

    #[test]
    fn ergodic_average_with_constant_weights_is_plain_mean() {
        let mut p = ScheduleParams::new(Variant::Basic, 0.0, 0.5, 8.0);
        p.sigma0 = Some(0.1);
        let mut sched = Schedule::new(p).unwrap();
        let mut gs = GapState::new(1.1);
        let mut mean = 0.0;
        for k in 0..7 {
            let st = sched.next_state();
            let x = StackedVar::single(GridField::constant(2, 2, k as f64));
            gs.ergodic_update(&x, &x, &st);
            mean += k as f64;
        }
        mean /= 7.0;
        let avg = gs.x_avg().unwrap();
        assert!((avg.part(0).at(0, 0, 0) - mean).abs() <= 1e-12);
    }

    #[test]
    fn ergodic_first_iterate_is_identity_and_weights_match_sum() {
        let p = ScheduleParams::new(Variant::CpAccel, 0.5, 0.4, 8.0);
        let mut sched = Schedule::new(p).unwrap();
        let mut gs = GapState::new(1.1);
        let st = sched.next_state();
        let x = StackedVar::single(GridField::constant(2, 2, 3.5));
        gs.ergodic_update(&x, &x, &st);
        let avg = gs.x_avg().unwrap();
        assert!((avg.part(0).at(0, 0, 0) - 3.5).abs() <= 1e-12);

        // Accumulated weight equals an independently computed sum.
        let mut expected = 1.0 / st.tau_tilde;
        let mut sched2 = Schedule::new(ScheduleParams::new(Variant::CpAccel, 0.5, 0.4, 8.0))
            .unwrap();
        sched2.next_state();
        for _ in 0..20 {
            let st = sched2.next_state();
            gs.ergodic_update(&x, &x, &st);
            expected += 1.0 / st.tau_tilde;
        }
        assert!((gs.qtilde() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn ergodic_average_is_convex_combination() {
        let p = ScheduleParams::new(Variant::CpAccel, 0.7, 0.3, 8.0);
        let mut sched = Schedule::new(p).unwrap();
        let mut gs = GapState::new(1.1);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut lo = vec![f64::INFINITY; 4];
        let mut hi = vec![f64::NEG_INFINITY; 4];
        for _ in 0..15 {
            let st = sched.next_state();
            let data: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            for (i, &v) in data.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
            let x = StackedVar::single(
                GridField::from_real(2, 2, FieldKind::Scalar, data).unwrap(),
            );
            gs.ergodic_update(&x, &x, &st);
        }
        let avg = gs.x_avg().unwrap();
        for (i, &v) in avg.part(0).real().iter().enumerate() {
            assert!(v >= lo[i] - 1e-12 && v <= hi[i] + 1e-12, "component {i} escaped hull");
        }
    }
}

//! Scalar step-length schedules for the solver variants, plus a runtime
//! ledger that re-verifies the defining step-compatibility conditions on a
//! recorded trace.
//!
//! All schedules are pure scalar recurrences: the same parameters produce
//! bit-identical traces. Per iteration `i` the solver consumes the primal
//! steps (tau_i, tau_perp_i), the over-relaxation factor theta_i and the
//! dual step sigma_{i+1}; everything else recorded here is diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{PdError, PdResult};

/// Which step-length recurrence drives a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Fixed steps, no over-relaxation decay.
    Basic,
    /// Full acceleration: omega = 1/sqrt(1 + 2 gamma tau) applied to every
    /// primal direction.
    CpAccel,
    /// Subspace acceleration with primal and dual penalties: tau shrinks on
    /// the strongly convex subspace while tau_perp follows the quadratic
    /// balancing rule controlled by zeta.
    Alg3,
    /// Subspace acceleration with a dual penalty only, using the decay
    /// factor as printed in the source algorithm: omega_tilde =
    /// 1/(1 + a_i tau_tilde^2).
    Alg4Printed,
    /// Same as [`Variant::Alg4Printed`] but with omega_tilde =
    /// 1/sqrt(1 + a_i tau_tilde^2), which makes the reciprocal-square
    /// telescoping identity exact.
    Alg4Sqrt,
    /// Fixed steps with an inertial combination applied after each update.
    Relaxed,
}

impl Variant {
    pub fn is_alg4(self) -> bool {
        matches!(self, Variant::Alg4Printed | Variant::Alg4Sqrt)
    }

    /// Whether the schedule solves the primary compatibility condition as an
    /// equality, which is what makes the telescoping identity hold.
    pub fn exact_primary_condition(self) -> bool {
        matches!(
            self,
            Variant::CpAccel | Variant::Alg3 | Variant::Alg4Printed | Variant::Alg4Sqrt
        )
    }
}

/// Parameters of a step-length schedule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub variant: Variant,
    /// Acceleration factor: lambda * gamma_bar with lambda in {1/2, 1}.
    pub gamma: f64,
    pub delta: f64,
    /// Proportionality constant of the tau_perp balancing rule (Alg3).
    pub zeta: f64,
    /// Exponent of the dual-penalty growth sequence a_i (Alg4).
    pub q: f64,
    pub tau0: f64,
    pub tau0_perp: f64,
    pub tau_tilde0: f64,
    /// Initial dual step for the fixed-step variants; when absent it is
    /// solved from tau0 * sigma0 * ||K||^2 = 1 - delta.
    pub sigma0: Option<f64>,
    /// Inertial factor of the relaxed variant.
    pub rho: f64,
    pub norm_sq_k: f64,
    pub norm_sq_kp: f64,
    /// Strong-convexity headroom on the complement; infinite for
    /// indicator-type functionals, making the feasibility checks vacuous.
    pub gamma_perp_bar: f64,
    /// Dual penalty headroom; infinite for indicator-type functionals.
    pub rho_bar: f64,
    /// Forces a_i = 0 (Alg4), reducing it to constant tau_tilde/tau_perp.
    pub degenerate_a: bool,
    /// Uses omega instead of omega_tilde as the decay factor in the dual
    /// step formula (the literal reading of the printed Alg4 sigma line).
    pub sigma_literal_omega: bool,
}

impl ScheduleParams {
    /// A schedule with sensible defaults for the given variant; callers
    /// override the fields they care about.
    pub fn new(variant: Variant, gamma: f64, tau0: f64, norm_sq_k: f64) -> Self {
        ScheduleParams {
            variant,
            gamma,
            delta: 0.01,
            zeta: 1.0 / (tau0 * tau0),
            q: 1.0,
            tau0,
            tau0_perp: tau0,
            tau_tilde0: tau0,
            sigma0: None,
            rho: 1.5,
            norm_sq_k,
            norm_sq_kp: norm_sq_k,
            gamma_perp_bar: f64::INFINITY,
            rho_bar: f64::INFINITY,
            degenerate_a: false,
            sigma_literal_omega: false,
        }
    }

    /// Validates positivity, the zeta cap, and the initialisation
    /// feasibility conditions. With infinite penalty headroom (the
    /// indicator-functional case) the latter degenerate to positivity.
    pub fn validate(&self) -> PdResult<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PdError::Invalid("delta must lie in (0, 1)".into()));
        }
        if self.tau0 <= 0.0 || self.tau0_perp <= 0.0 || self.tau_tilde0 <= 0.0 {
            return Err(PdError::Invalid("initial steps must be positive".into()));
        }
        if self.gamma < 0.0 {
            return Err(PdError::Invalid("gamma must be nonnegative".into()));
        }
        if self.norm_sq_k <= 0.0 || self.norm_sq_kp < 0.0 {
            return Err(PdError::Invalid("operator norm bounds must be positive".into()));
        }
        match self.variant {
            Variant::Alg3 => {
                if self.zeta <= 0.0 {
                    return Err(PdError::Invalid("zeta must be positive".into()));
                }
                let cap = 1.0 / (self.tau0_perp * self.tau0_perp);
                if self.zeta > cap * (1.0 + 1e-12) {
                    return Err(PdError::Invalid(format!(
                        "zeta {} exceeds tau0_perp^-2 = {}, which would let tau_perp escape its cap",
                        self.zeta, cap
                    )));
                }
                // tau0 <= (lambda^2 / 2 gamma) min(gp^2 / zeta,
                // rb^2 zeta (1-delta)^2 / ||K||^4); vacuous at infinity.
                if self.gamma > 0.0
                    && (self.gamma_perp_bar.is_finite() || self.rho_bar.is_finite())
                {
                    let lambda_sq = 1.0; // headroom bounds already include lambda
                    let a = self.gamma_perp_bar.powi(2) / self.zeta;
                    let b = self.rho_bar.powi(2) * self.zeta * (1.0 - self.delta).powi(2)
                        / self.norm_sq_k.powi(2);
                    let cap = lambda_sq / (2.0 * self.gamma) * a.min(b);
                    if self.tau0 > cap {
                        return Err(PdError::Invalid(format!(
                            "tau0 {} violates the penalty-headroom cap {}",
                            self.tau0, cap
                        )));
                    }
                }
            }
            Variant::Alg4Printed | Variant::Alg4Sqrt => {
                if self.q < 0.0 {
                    return Err(PdError::Invalid("q must be nonnegative".into()));
                }
                if self.rho_bar.is_finite() && !self.degenerate_a {
                    let a0 = 1.0 / (self.tau_tilde0 * self.tau_tilde0);
                    let lhs = a0 * self.tau0_perp * self.tau_tilde0 * self.tau_tilde0
                        * self.norm_sq_k
                        / (2.0 * (1.0 - self.delta));
                    if lhs > self.rho_bar {
                        return Err(PdError::Invalid(format!(
                            "dual-penalty feasibility fails: {lhs} > rho_bar {}",
                            self.rho_bar
                        )));
                    }
                }
            }
            Variant::Relaxed => {
                if !(self.rho > 0.0 && self.rho < 2.0) {
                    return Err(PdError::Invalid("relaxation rho must lie in (0, 2)".into()));
                }
            }
            Variant::Basic | Variant::CpAccel => {}
        }
        Ok(())
    }

    /// Default coupled dual step (1 - delta) / (tau0 ||K||^2).
    pub fn sigma0_default(&self) -> f64 {
        (1.0 - self.delta) / (self.tau0 * self.norm_sq_k)
    }
}

/// All scalar schedule quantities of one iteration. Fields suffixed `_next`
/// refer to index i+1 and exist so the trace is self-contained.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepState {
    pub iter: usize,
    pub tau: f64,
    pub tau_perp: f64,
    pub tau_tilde: f64,
    /// Dual step sigma_{i+1}, the one used by this iteration's dual update.
    pub sigma: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    pub omega_perp: f64,
    /// Introduced strong monotonicity on the complement (diagnostic).
    pub gamma_perp: f64,
    /// Dual penalty factor rho_{i+1} (diagnostic).
    pub rho_next: f64,
    /// Over-relaxation factor actually applied to the iterate.
    pub theta: f64,
    pub tau_next: f64,
    pub tau_perp_next: f64,
    pub tau_tilde_next: f64,
    /// Running sum of 1/tau_tilde_j for j <= i (the ergodic weight).
    pub qtilde: f64,
    /// Running sum of a_j for j <= i (Alg4).
    pub a_sum: f64,
}

/// Iterator-style schedule generator.
#[derive(Clone, Debug)]
pub struct Schedule {
    params: ScheduleParams,
    iter: usize,
    tau: f64,
    tau_perp: f64,
    tau_tilde: f64,
    sigma: f64,
    qtilde: f64,
    a_sum: f64,
}

/// The dual step from the decay factor and the current primal steps:
/// sigma = (1 - delta) / (omega_decay (max(0, tau - tau_perp) ||KP||^2
/// + tau_perp ||K||^2)).
pub fn sigma_update(omega_decay: f64, tau: f64, tau_perp: f64, params: &ScheduleParams) -> f64 {
    let denom = omega_decay
        * ((tau - tau_perp).max(0.0) * params.norm_sq_kp + tau_perp * params.norm_sq_k);
    (1.0 - params.delta) / denom
}

impl Schedule {
    pub fn new(params: ScheduleParams) -> PdResult<Self> {
        params.validate()?;
        let sigma = params.sigma0.unwrap_or_else(|| params.sigma0_default());
        let (tau, tau_perp, tau_tilde) = match params.variant {
            // The fixed-step and fully accelerated schedules act on the
            // whole space: tau_perp mirrors tau and tau_tilde tracks tau.
            Variant::Basic | Variant::CpAccel | Variant::Relaxed => {
                (params.tau0, params.tau0, params.tau0)
            }
            Variant::Alg3 => (params.tau0, params.tau0_perp, params.tau0),
            Variant::Alg4Printed | Variant::Alg4Sqrt => {
                (params.tau0, params.tau0_perp, params.tau_tilde0)
            }
        };
        Ok(Schedule { params, iter: 0, tau, tau_perp, tau_tilde, sigma, qtilde: 0.0, a_sum: 0.0 })
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    /// Produces the scalars for the current iteration and advances.
    pub fn next_state(&mut self) -> StepState {
        let p = &self.params;
        let i = self.iter;
        let (tau, tau_perp, tau_tilde) = (self.tau, self.tau_perp, self.tau_tilde);
        let gamma = p.gamma;

        let state = match p.variant {
            Variant::Basic | Variant::Relaxed => StepState {
                iter: i,
                tau,
                tau_perp,
                tau_tilde,
                sigma: self.sigma,
                omega: 1.0,
                omega_tilde: 1.0,
                omega_perp: 1.0,
                gamma_perp: 0.0,
                rho_next: 0.0,
                theta: 1.0,
                tau_next: tau,
                tau_perp_next: tau_perp,
                tau_tilde_next: tau_tilde,
                qtilde: self.qtilde + 1.0 / tau_tilde,
                a_sum: 0.0,
            },
            Variant::CpAccel => {
                let omega = 1.0 / (1.0 + 2.0 * gamma * tau).sqrt();
                let sigma_next = self.sigma / omega;
                StepState {
                    iter: i,
                    tau,
                    tau_perp,
                    tau_tilde,
                    sigma: sigma_next,
                    omega,
                    omega_tilde: omega,
                    omega_perp: omega,
                    // On the trivial complement the introduced monotonicity
                    // can match gamma itself, which closes the ledger's
                    // second condition with equality.
                    gamma_perp: gamma,
                    rho_next: 0.0,
                    theta: omega,
                    tau_next: tau * omega,
                    tau_perp_next: tau_perp * omega,
                    tau_tilde_next: tau_tilde * omega,
                    qtilde: self.qtilde + 1.0 / tau_tilde,
                    a_sum: 0.0,
                }
            }
            Variant::Alg3 => {
                let omega = 1.0 / (1.0 + 2.0 * gamma * tau).sqrt();
                let c = 1.0 / (p.zeta * tau_perp * tau_perp);
                let omega_perp =
                    0.5 * ((1.0 - c) * omega + ((1.0 - c).powi(2) * omega * omega + 4.0 * c).sqrt());
                let tau_perp_next = tau_perp * omega_perp;
                let sigma = sigma_update(omega, tau, tau_perp, p);
                let gamma_perp = 0.5 * p.zeta * (tau_perp_next / omega - tau_perp);
                let rho_next = omega * p.norm_sq_k * gamma_perp / ((1.0 - p.delta) * p.zeta);
                StepState {
                    iter: i,
                    tau,
                    tau_perp,
                    tau_tilde,
                    sigma,
                    omega,
                    omega_tilde: omega,
                    omega_perp,
                    gamma_perp,
                    rho_next,
                    theta: omega,
                    tau_next: tau * omega,
                    tau_perp_next,
                    tau_tilde_next: tau_tilde * omega,
                    qtilde: self.qtilde + 1.0 / tau_tilde,
                    a_sum: 0.0,
                }
            }
            Variant::Alg4Printed | Variant::Alg4Sqrt => {
                let a_i = if p.degenerate_a {
                    0.0
                } else {
                    ((i as f64 + 1.0).powf(p.q) - (i as f64).powf(p.q))
                        / (p.tau_tilde0 * p.tau_tilde0)
                };
                let growth = 1.0 + a_i * tau_tilde * tau_tilde;
                let omega_tilde = match p.variant {
                    Variant::Alg4Printed => 1.0 / growth,
                    _ => 1.0 / growth.sqrt(),
                };
                let omega = (1.0 / omega_tilde) / (1.0 + 2.0 * gamma * tau);
                let omega_decay = if p.sigma_literal_omega { omega } else { omega_tilde };
                let sigma = sigma_update(omega_decay, tau, tau_perp, p);
                let tau_tilde_next = tau_tilde * omega_tilde;
                // Dual penalty solving the sigma-side condition as an
                // equality (with the nonnegative eta term dropped).
                let rho_next = p.norm_sq_k / (2.0 * (1.0 - p.delta))
                    * tau_tilde_next
                    * (tau_perp / tau_tilde)
                    * (1.0 / (omega_tilde * omega_tilde) - 1.0);
                StepState {
                    iter: i,
                    tau,
                    tau_perp,
                    tau_tilde,
                    sigma,
                    omega,
                    omega_tilde,
                    omega_perp: 1.0 / omega_tilde,
                    gamma_perp: 0.0,
                    rho_next,
                    theta: omega_tilde,
                    tau_next: tau * omega,
                    tau_perp_next: tau_perp / omega_tilde,
                    tau_tilde_next,
                    qtilde: self.qtilde + 1.0 / tau_tilde,
                    a_sum: self.a_sum + a_i,
                }
            }
        };

        self.iter += 1;
        self.tau = state.tau_next;
        self.tau_perp = state.tau_perp_next;
        self.tau_tilde = state.tau_tilde_next;
        self.sigma = state.sigma;
        self.qtilde = state.qtilde;
        self.a_sum = state.a_sum;
        state
    }

    /// Runs the recurrence for `n` iterations and collects the trace.
    pub fn trace(params: ScheduleParams, n: usize) -> PdResult<Vec<StepState>> {
        let mut sched = Schedule::new(params)?;
        Ok((0..n).map(|_| sched.next_state()).collect())
    }
}

/// Which ledger condition a violation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// Primary (tau) compatibility, including its equality form.
    Primal,
    /// Complement (tau_perp) compatibility against gamma_perp.
    Complement,
    /// Dual (sigma-side) compatibility against rho.
    Dual,
    /// Structural: positivity or the tau_tilde cap.
    Structure,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub iter: usize,
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
}

/// Ledger report for one schedule trace.
#[derive(Clone, Debug, Default)]
pub struct LedgerReport {
    pub violations: Vec<Violation>,
    /// Relative error of the telescoping identity, when the variant solves
    /// the primary condition exactly.
    pub telescoping_rel_err: Option<f64>,
}

impl LedgerReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
            && self.telescoping_rel_err.map(|e| e <= 1e-8).unwrap_or(true)
    }
}

/// Re-verifies, with tolerance 1e-9 relative, the per-iteration conditions
/// a valid trace must satisfy:
/// 1. (1/tau_tilde_i)(1 + 2 gamma tau_i)/tau_i >= (1/tau_tilde_{i+1})/tau_{i+1},
///    with equality for the exactly-solved schedules;
/// 2. 1/(tau_tilde_i tau_perp_i) - 1/(tau_tilde_{i+1} tau_perp_{i+1})
///    >= -2 gamma_perp_i / tau_tilde_i;
/// 3. (1/(1-delta)) (eta_i ||KP||^2 + (tau_perp_i/tau_tilde_i -
///    tau_perp_{i+1}/tau_tilde_{i+1}) ||K||^2) >= -2 rho_{i+1}/tau_tilde_{i+1};
/// plus positivity, the tau_tilde cap, and the telescoping identity
/// 1/(tau_tilde_N tau_N) = 1/(tau_tilde_0 tau_0) + 2 gamma sum_j 1/tau_tilde_j.
pub fn check_conditions(trace: &[StepState], params: &ScheduleParams) -> PdResult<LedgerReport> {
    if trace.len() < 2 {
        return Err(PdError::Invalid("ledger needs a trace of at least 2 states".into()));
    }
    const TOL: f64 = 1e-9;
    let mut report = LedgerReport::default();
    let gamma = params.gamma;
    let exact = params.variant.exact_primary_condition();

    let tau_tilde0 = trace[0].tau_tilde;
    for s in trace {
        let positive =
            s.tau > 0.0 && s.tau_perp > 0.0 && s.tau_tilde > 0.0 && s.sigma > 0.0;
        let capped = s.tau_tilde <= tau_tilde0 * (1.0 + TOL);
        if !positive || !capped {
            report.violations.push(Violation {
                iter: s.iter,
                condition: Condition::Structure,
                lhs: s.tau_tilde,
                rhs: tau_tilde0,
            });
        }
    }

    for pair in trace.windows(2) {
        let (s, n) = (&pair[0], &pair[1]);

        let lhs1 = (1.0 + 2.0 * gamma * s.tau) / (s.tau_tilde * s.tau);
        let rhs1 = 1.0 / (n.tau_tilde * n.tau);
        let scale1 = lhs1.abs().max(rhs1.abs());
        let bad1 = if exact {
            (lhs1 - rhs1).abs() > TOL * scale1
        } else {
            lhs1 < rhs1 - TOL * scale1
        };
        if bad1 {
            report.violations.push(Violation {
                iter: s.iter,
                condition: Condition::Primal,
                lhs: lhs1,
                rhs: rhs1,
            });
        }

        let lhs2 = 1.0 / (s.tau_tilde * s.tau_perp) - 1.0 / (n.tau_tilde * n.tau_perp);
        let rhs2 = -2.0 * s.gamma_perp / s.tau_tilde;
        let scale2 = lhs2.abs().max(rhs2.abs()).max(1.0 / (s.tau_tilde * s.tau_perp));
        if lhs2 < rhs2 - TOL * scale2 {
            report.violations.push(Violation {
                iter: s.iter,
                condition: Condition::Complement,
                lhs: lhs2,
                rhs: rhs2,
            });
        }

        let eta = (s.tau - s.tau_perp).max(0.0) / s.tau_tilde
            - (n.tau - n.tau_perp).max(0.0) / n.tau_tilde;
        let lhs3 = (eta * params.norm_sq_kp
            + (s.tau_perp / s.tau_tilde - n.tau_perp / n.tau_tilde) * params.norm_sq_k)
            / (1.0 - params.delta);
        let rhs3 = -2.0 * s.rho_next / n.tau_tilde;
        let scale3 =
            lhs3.abs().max(rhs3.abs()).max(params.norm_sq_k * s.tau_perp / s.tau_tilde);
        if lhs3 < rhs3 - TOL * scale3 {
            report.violations.push(Violation {
                iter: s.iter,
                condition: Condition::Dual,
                lhs: lhs3,
                rhs: rhs3,
            });
        }
    }

    if exact {
        let last = trace.last().expect("nonempty trace");
        let lhs = 1.0 / (last.tau_tilde_next * last.tau_next);
        let rhs = 1.0 / (trace[0].tau_tilde * trace[0].tau) + 2.0 * gamma * last.qtilde;
        report.telescoping_rel_err = Some((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
    }

    Ok(report)
}

/// Writes a trace as CSV with one row per iteration.
pub fn write_schedule_csv(path: impl AsRef<std::path::Path>, trace: &[StepState]) -> PdResult<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,tau,tau_perp,tau_tilde,sigma,omega,omega_tilde,omega_perp,gamma_perp,rho")?;
    for s in trace {
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.iter,
            s.tau,
            s.tau_perp,
            s.tau_tilde,
            s.sigma,
            s.omega,
            s.omega_tilde,
            s.omega_perp,
            s.gamma_perp,
            s.rho_next
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(variant: Variant, gamma: f64, tau0: f64) -> ScheduleParams {
        ScheduleParams::new(variant, gamma, tau0, 8.0)
    }

    #[test]
    fn cp_accel_with_zero_gamma_is_stationary() {
        let mut s = Schedule::new(params(Variant::CpAccel, 0.0, 0.4)).unwrap();
        let st = s.next_state();
        assert_eq!(st.omega, 1.0);
        assert_eq!(st.tau_next, 0.4);
        assert_eq!(st.sigma, s.params().sigma0_default());
    }

    #[test]
    fn cp_accel_single_step_closed_form() {
        // Frozen from a 50-digit evaluation of the closed form.
        let mut s = Schedule::new(params(Variant::CpAccel, 0.5, 0.5)).unwrap();
        let st = s.next_state();
        assert!((st.omega - 0.81649658092772603273).abs() <= 1e-15);
        assert!((st.tau_next - 0.40824829046386301637).abs() <= 1e-15);
    }

    #[test]
    fn cp_accel_satisfies_reciprocal_and_harmonic_bounds() {
        // tau_N <= (1/gamma + tau0)/N and 1/tau_N <= 1/tau0 + gamma N.
        let gamma = 0.5;
        let tau0 = 0.52 / 8.0_f64.sqrt();
        let mut s = Schedule::new(params(Variant::CpAccel, gamma, tau0)).unwrap();
        let c_tau = 1.0 / gamma + tau0;
        for n in 1..=100_000usize {
            let st = s.next_state();
            let tau_n = st.tau_next; // tau at index n
            assert!(tau_n <= c_tau / n as f64, "tau bound fails at {n}");
            assert!(1.0 / tau_n <= 1.0 / tau0 + gamma * n as f64 + 1e-9, "reciprocal at {n}");
        }
    }

    #[test]
    fn alg3_with_cap_zeta_keeps_tau_perp_constant() {
        let tau0_perp = 3.0 * 0.1838;
        let mut p = params(Variant::Alg3, 0.5, 0.1838);
        p.tau0_perp = tau0_perp;
        p.zeta = 1.0 / (tau0_perp * tau0_perp);
        let trace = Schedule::trace(p, 1000).unwrap();
        for s in &trace {
            assert!(
                (s.tau_perp - tau0_perp).abs() <= 1e-12 * tau0_perp,
                "tau_perp drifted at {}",
                s.iter
            );
        }
    }

    #[test]
    fn alg3_with_zero_gamma_is_stationary() {
        // (1-c)^2 + 4c = (1+c)^2 makes omega_perp = 1 when omega = 1.
        let mut p = params(Variant::Alg3, 0.0, 0.2);
        p.tau0_perp = 0.05;
        p.zeta = 10.0; // well below the cap 400
        let trace = Schedule::trace(p, 50).unwrap();
        for s in &trace {
            assert!((s.omega - 1.0).abs() <= 1e-15);
            assert!((s.omega_perp - 1.0).abs() <= 1e-14);
            assert!((s.tau_perp - 0.05).abs() <= 1e-13);
        }
    }

    #[test]
    fn alg3_single_step_matches_extended_precision_oracle() {
        // Frozen from a 50-digit evaluation with delta = 0.01,
        // ||K||^2 = 8, ||KP||^2 = 6.
        let tau0 = 0.1838;
        let tau0_perp = 3.0 * tau0;
        let mut p = ScheduleParams::new(Variant::Alg3, 0.5, tau0, 8.0);
        p.norm_sq_kp = 6.0;
        p.tau0_perp = tau0_perp;
        p.zeta = 1.0 / (tau0_perp * tau0_perp);
        let mut s = Schedule::new(p).unwrap();
        let st = s.next_state();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(st.omega, 0.91909590723919291495) <= 1e-12);
        assert!((st.omega_perp - 1.0).abs() <= 1e-12);
        assert!(rel(st.tau_next, 0.16892982775056365777) <= 1e-12);
        assert!(rel(st.tau_perp_next, 0.5514) <= 1e-12);
        assert!(rel(st.sigma, 0.24418423051320706542) <= 1e-12);
        assert!(rel(st.gamma_perp, 0.079820216711785067751) <= 1e-12);
        assert!(rel(st.rho_next, 0.18024451211437990585) <= 1e-12);
    }

    #[test]
    fn alg3_loose_zeta_step_matches_oracle_and_grows_tau_perp() {
        // Same state but zeta = tau_perp^-2 / 100: tau_perp increases.
        let tau0 = 0.1838;
        let tau0_perp = 3.0 * tau0;
        let mut p = params(Variant::Alg3, 0.5, tau0);
        p.tau0_perp = tau0_perp;
        p.zeta = 1.0 / (tau0_perp * tau0_perp) / 100.0;
        let mut s = Schedule::new(p).unwrap();
        let st = s.next_state();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(st.omega_perp, 1.0860528820776922423) <= 1e-12);
        assert!(rel(st.tau_perp_next, 0.59884955917763950243) <= 1e-12);
        assert!(rel(st.gamma_perp, 0.0016472024416061346151) <= 1e-12);
        assert!(st.tau_perp_next > tau0_perp);
    }

    #[test]
    fn alg3_lemma_facts_hold_along_the_trace() {
        let tau0 = 80.0 * 0.1838;
        let tau0_perp = 3.0 * 0.1838;
        let mut p = params(Variant::Alg3, 0.5, tau0);
        p.tau0_perp = tau0_perp;
        p.zeta = 1.0 / (tau0_perp * tau0_perp) / 100.0;
        let zeta = p.zeta;
        let gamma = p.gamma;
        let trace = Schedule::trace(p, 5000).unwrap();
        let gp_cap = (2.0 * zeta * gamma * tau0).sqrt();
        for pair in trace.windows(2) {
            let (s, n) = (&pair[0], &pair[1]);
            assert!(s.omega <= 1.0);
            assert!(s.omega_perp >= s.omega - 1e-15, "omega ordering at {}", s.iter);
            assert!(s.tau_perp <= zeta.powf(-0.5) * (1.0 + 1e-12), "cap at {}", s.iter);
            assert!(s.gamma_perp >= -1e-15 && s.gamma_perp <= gp_cap + 1e-12);
            // Balancing identity between consecutive states.
            let lhs = 1.0 / (s.tau_tilde * s.tau_perp) - 1.0 / (n.tau_tilde * n.tau_perp);
            let rhs = zeta * (s.tau_perp / s.tau_tilde - n.tau_perp / n.tau_tilde);
            let scale = (1.0 / (s.tau_tilde * s.tau_perp)).abs();
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "balancing at {}", s.iter);
        }
    }

    #[test]
    fn alg4_degenerate_sequence_freezes_tilde_quantities() {
        let mut p = params(Variant::Alg4Printed, 0.5, 0.4);
        p.degenerate_a = true;
        p.tau0_perp = 0.1;
        p.tau_tilde0 = 0.4;
        let trace = Schedule::trace(p, 20).unwrap();
        for s in &trace {
            assert_eq!(s.omega_tilde, 1.0);
            assert_eq!(s.tau_perp_next, s.tau_perp);
            assert_eq!(s.tau_tilde_next, s.tau_tilde);
            assert!((s.omega - 1.0 / (1.0 + 2.0 * 0.5 * s.tau)).abs() <= 1e-15);
        }
    }

    #[test]
    fn alg4_sqrt_telescopes_reciprocal_squares_exactly() {
        for &q in &[0.5, 1.0, 2.0] {
            let mut p = params(Variant::Alg4Sqrt, 0.5, 0.4);
            p.q = q;
            p.tau_tilde0 = 0.7;
            p.tau0_perp = 0.1;
            let trace = Schedule::trace(p, 2000).unwrap();
            for s in &trace {
                let lhs = 1.0 / (s.tau_tilde_next * s.tau_tilde_next)
                    - 1.0 / (s.tau_tilde * s.tau_tilde);
                let a_i = s.a_sum
                    - if s.iter == 0 {
                        0.0
                    } else {
                        trace[s.iter - 1].a_sum
                    };
                assert!(
                    (lhs - a_i).abs() <= 1e-9 * a_i.max(1.0),
                    "telescoping at {} (q={q})",
                    s.iter
                );
            }
        }
    }

    #[test]
    fn alg4_first_step_values() {
        // q = 1, tau_tilde0 = 1 gives a_0 = 1.
        let mut p = params(Variant::Alg4Printed, 0.5, 0.4);
        p.tau_tilde0 = 1.0;
        p.tau0_perp = 0.1;
        let mut s = Schedule::new(p.clone()).unwrap();
        let st = s.next_state();
        assert!((st.omega_tilde - 0.5).abs() <= 1e-15);
        assert!((st.tau_tilde_next - 0.5).abs() <= 1e-15);

        p.variant = Variant::Alg4Sqrt;
        let mut s = Schedule::new(p).unwrap();
        let st = s.next_state();
        assert!((st.omega_tilde - 0.7071067811865475244).abs() <= 1e-15);
        assert!((st.tau_tilde_next - 0.7071067811865475244).abs() <= 1e-15);
    }

    #[test]
    fn alg4_monotonicity_and_printed_inequality() {
        for variant in [Variant::Alg4Printed, Variant::Alg4Sqrt] {
            let mut p = params(variant, 0.5, 0.4);
            p.tau_tilde0 = 0.9;
            p.tau0_perp = 0.2;
            let trace = Schedule::trace(p, 500).unwrap();
            for s in &trace {
                assert!(s.tau_tilde_next <= s.tau_tilde + 1e-15, "tau_tilde grew");
                assert!(s.tau_perp_next >= s.tau_perp - 1e-15, "tau_perp shrank");
                assert!(s.tau_tilde <= 0.9 * (1.0 + 1e-12));
                let gain = 1.0 / (s.tau_tilde_next * s.tau_tilde_next)
                    - 1.0 / (s.tau_tilde * s.tau_tilde);
                let a_i = s.a_sum - trace.get(s.iter.wrapping_sub(1)).map_or(0.0, |t| t.a_sum);
                assert!(gain >= a_i - 1e-9 * a_i.max(1.0), "reciprocal-square gain");
            }
        }
    }

    #[test]
    fn sigma_update_examples() {
        let mut p = params(Variant::Alg3, 0.5, 0.2);
        p.norm_sq_k = 11.4;
        p.norm_sq_kp = 8.0;
        // tau_perp >= tau: the max term vanishes.
        let s = sigma_update(1.0, 0.05, 0.2, &p);
        assert!((s - 0.99 / (0.2 * 11.4)).abs() <= 1e-15);
        // Frozen arithmetic example.
        let s = sigma_update(1.0, 0.2, 0.05, &p);
        assert!((s - 0.55932203389830508475).abs() <= 1e-15);
        // Full-space reduction: P = I collapses to the classical coupling
        // sigma tau ||K||^2 omega = 1 - delta.
        p.norm_sq_kp = 11.4;
        let omega = 0.9;
        let s = sigma_update(omega, 0.2, 0.2, &p);
        assert!((s * 0.2 * 11.4 * omega - 0.99).abs() <= 1e-12);
    }

    #[test]
    fn schedules_are_bit_deterministic() {
        let mut p = params(Variant::Alg3, 0.5, 0.3);
        p.tau0_perp = 0.1;
        p.zeta = 99.0;
        let a = Schedule::trace(p.clone(), 200).unwrap();
        let b = Schedule::trace(p, 200).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tau.to_bits(), y.tau.to_bits());
            assert_eq!(x.sigma.to_bits(), y.sigma.to_bits());
        }
    }

    #[test]
    fn ledger_passes_cp_accel_and_telescopes() {
        let p = params(Variant::CpAccel, 0.5, 0.18);
        let trace = Schedule::trace(p.clone(), 10_000).unwrap();
        let report = check_conditions(&trace, &p).unwrap();
        assert!(report.ok(), "violations: {:?}", report.violations.first());
        assert!(report.telescoping_rel_err.unwrap() <= 1e-8);
    }

    #[test]
    fn ledger_passes_all_default_variants() {
        for variant in [
            Variant::Basic,
            Variant::CpAccel,
            Variant::Alg3,
            Variant::Alg4Printed,
            Variant::Alg4Sqrt,
            Variant::Relaxed,
        ] {
            let mut p = params(variant, 0.5, 0.18 * 80.0);
            p.tau0_perp = 0.18 * 3.0;
            p.tau_tilde0 = p.tau0;
            p.zeta = 1.0 / (p.tau0_perp * p.tau0_perp);
            if variant == Variant::Basic || variant == Variant::Relaxed {
                p.gamma = 0.0;
                p.tau0 = 0.18;
            }
            let trace = Schedule::trace(p.clone(), 10_000).unwrap();
            let report = check_conditions(&trace, &p).unwrap();
            assert!(
                report.ok(),
                "{variant:?} violations: {:?}, telescoping {:?}",
                report.violations.first(),
                report.telescoping_rel_err
            );
        }
    }

    #[test]
    fn ledger_passes_alg3_with_constant_tau_perp() {
        let mut p = params(Variant::Alg3, 0.5, 0.5);
        p.tau0_perp = 0.25;
        p.zeta = 16.0;
        let trace = Schedule::trace(p.clone(), 2000).unwrap();
        let report = check_conditions(&trace, &p).unwrap();
        assert!(report.ok());
        for s in &trace {
            assert!((s.tau_perp - 0.25).abs() <= 1e-12);
        }
    }

    #[test]
    fn ledger_flags_corrupted_trace() {
        let p = params(Variant::CpAccel, 0.5, 0.18);
        let mut trace = Schedule::trace(p.clone(), 100).unwrap();
        trace[40].tau *= 1.01;
        let report = check_conditions(&trace, &p).unwrap();
        assert!(!report.ok());
        assert!(report
            .violations
            .iter()
            .any(|v| v.condition == Condition::Primal && (v.iter == 39 || v.iter == 40)));
    }

    #[test]
    fn validate_rejects_bad_parameters() {
        let mut p = params(Variant::Alg3, 0.5, 0.3);
        p.tau0_perp = 0.5;
        p.zeta = 1.0 / (0.5 * 0.5) * 1.1; // above the cap
        assert!(p.validate().is_err());

        let mut p = params(Variant::Relaxed, 0.0, 0.3);
        p.rho = 2.5;
        assert!(p.validate().is_err());

        let mut p = params(Variant::Alg4Printed, 0.5, 0.3);
        p.q = -1.0;
        assert!(p.validate().is_err());

        let mut p = params(Variant::Basic, 0.0, 0.3);
        p.delta = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn csv_export_round_trips_column_count() {
        let p = params(Variant::Alg3, 0.5, 0.3);
        let mut p = p;
        p.tau0_perp = 0.1;
        p.zeta = 1.0;
        let trace = Schedule::trace(p, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sched.csv");
        write_schedule_csv(&path, &trace).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 10);
        assert_eq!(lines.count(), 5);
    }
}

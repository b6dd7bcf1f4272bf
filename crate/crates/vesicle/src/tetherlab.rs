//! Closed-form tether mechanics for a pulled cylindrical membrane tube:
//! equilibrium radius, relaxation time, equilibrium surface pressure, the
//! radius ODE, and exponential fitting of radius traces. These serve as the
//! analytical reference for the full surface simulations.

use crate::error::{Error, Result};
use crate::mesh::{SurfaceMesh, Vec3};

/// Parameters of the analytical tether model (non-dimensional defaults).
#[derive(Debug, Clone, Copy)]
pub struct TetherParams {
    /// Pulling force.
    pub force: f64,
    /// Bending modulus.
    pub bending_modulus: f64,
    /// Surface viscosity.
    pub mu: f64,
    /// Internal pressure; the classical reduced equation takes it as zero.
    pub pressure: f64,
}

impl TetherParams {
    pub fn new(force: f64) -> Result<Self> {
        if !(force > 0.0) {
            return Err(Error::Parameter(format!(
                "tether force must be positive, got {force}"
            )));
        }
        Ok(Self {
            force,
            bending_modulus: 1.0,
            mu: 1.0,
            pressure: 0.0,
        })
    }
}

/// Equilibrium tube radius `2 pi c / F`.
pub fn r_eq(params: &TetherParams) -> f64 {
    2.0 * std::f64::consts::PI * params.bending_modulus / params.force
}

/// Relaxation time of the radius toward equilibrium,
/// `4 mu R_eq^2 / c = 16 pi^2 mu c / F^2`.
pub fn relax_time(params: &TetherParams) -> f64 {
    let r = r_eq(params);
    4.0 * params.mu * r * r / params.bending_modulus
}

/// Surface pressure of the equilibrated tube, `-F^2 / (8 pi^2 c)`.
pub fn surface_pressure_eq(params: &TetherParams) -> f64 {
    -params.force * params.force
        / (8.0 * std::f64::consts::PI * std::f64::consts::PI * params.bending_modulus)
}

/// Radial contraction speed of a cylinder of radius `r` under the pulling
/// force, including the internal-pressure term.
pub fn radial_velocity(params: &TetherParams, r: f64) -> f64 {
    let c = params.bending_modulus;
    let laplace = 2.0 * std::f64::consts::PI * c / r * (1.0 + params.pressure * r.powi(3) / c);
    -(params.force - laplace) / (8.0 * std::f64::consts::PI * params.mu)
}

/// Sampled radius history.
#[derive(Debug, Clone)]
pub struct TetherTrace {
    pub samples: Vec<(f64, f64)>,
}

impl TetherTrace {
    pub fn final_radius(&self) -> f64 {
        self.samples.last().map(|s| s.1).unwrap_or(f64::NAN)
    }
}

/// Integrate `dR/dt` with an embedded Dormand-Prince 4(5) scheme and
/// adaptive steps until `t_end`, sampling every accepted step.
///
/// With zero pressure the equation reduces to
/// `dR/dt = (c/4mu) (1/R - 1/R_eq)`, which approaches the equilibrium
/// radius monotonically from either side.
pub fn integrate_radius(
    params: &TetherParams,
    r0: f64,
    t_end: f64,
    rel_tol: f64,
) -> Result<TetherTrace> {
    if !(r0 > 0.0) {
        return Err(Error::Parameter(format!("initial radius must be positive, got {r0}")));
    }
    if !(t_end >= 0.0) {
        return Err(Error::Parameter("t_end must be nonnegative".into()));
    }
    let tol = rel_tol.max(1e-14);
    let f = |r: f64| radial_velocity(params, r);

    // Dormand-Prince coefficients
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut t = 0.0;
    let mut r = r0;
    let mut samples = vec![(t, r)];
    let time_scale = relax_time(params);
    let mut h = (time_scale * 1e-3).min(t_end.max(1e-30));
    let mut k = [0.0f64; 7];

    while t < t_end {
        h = h.min(t_end - t);
        k[0] = f(r);
        let mut failed_radius = false;
        for stage in 0..6 {
            let mut ri = r;
            for j in 0..=stage {
                ri += h * A[stage][j] * k[j];
            }
            if ri <= 0.0 {
                failed_radius = true;
                break;
            }
            k[stage + 1] = f(ri);
        }
        if failed_radius {
            h *= 0.5;
            if h < 1e-16 * time_scale {
                return Err(Error::Integration(
                    "radius driven to zero; step size underflow".into(),
                ));
            }
            continue;
        }
        let mut r5 = r;
        let mut r4 = r;
        for j in 0..7 {
            r5 += h * B5[j] * k[j];
            r4 += h * B4[j] * k[j];
        }
        let err = (r5 - r4).abs() / (tol * r.abs().max(1e-30));
        if err <= 1.0 {
            if r5 <= 0.0 {
                return Err(Error::Integration("radius became nonpositive".into()));
            }
            t += h;
            r = r5;
            samples.push((t, r));
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < 1e-16 * time_scale {
            return Err(Error::Integration("step size underflow".into()));
        }
    }
    Ok(TetherTrace { samples })
}

/// Least-squares fit of `a e^{-t/T} + b` to a trace by golden-section
/// search over `T` with the linear parameters solved exactly.
#[derive(Debug, Clone)]
pub struct ExpFit {
    pub amplitude: f64,
    pub time_constant: f64,
    pub offset: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// Set when the trace was not monotone and the fit is suspect.
    pub warning: Option<String>,
}

pub fn fit_exponential(trace: &TetherTrace) -> Result<ExpFit> {
    let n = trace.samples.len();
    if n < 10 {
        return Err(Error::Parameter(format!(
            "exponential fit needs at least 10 samples, got {n}"
        )));
    }
    let mut increasing = true;
    let mut decreasing = true;
    for w in trace.samples.windows(2) {
        if w[1].1 > w[0].1 + 1e-14 {
            decreasing = false;
        }
        if w[1].1 < w[0].1 - 1e-14 {
            increasing = false;
        }
    }
    let monotone = increasing || decreasing;

    let t0 = trace.samples[0].0;
    let span = trace.samples[n - 1].0 - t0;
    if !(span > 0.0) {
        return Err(Error::Parameter("trace has zero time span".into()));
    }

    // linear LSQ for (a, b) at fixed T, returning the squared residual
    let sq_residual = |tau: f64| -> (f64, f64, f64) {
        let mut s_ee = 0.0;
        let mut s_e = 0.0;
        let mut s_er = 0.0;
        let mut s_r = 0.0;
        let m = n as f64;
        for &(t, r) in &trace.samples {
            let e = (-(t - t0) / tau).exp();
            s_ee += e * e;
            s_e += e;
            s_er += e * r;
            s_r += r;
        }
        let det = s_ee * m - s_e * s_e;
        if det.abs() < 1e-300 {
            return (f64::INFINITY, 0.0, 0.0);
        }
        let a = (s_er * m - s_e * s_r) / det;
        let b = (s_ee * s_r - s_e * s_er) / det;
        let mut ss = 0.0;
        for &(t, r) in &trace.samples {
            let model = a * (-(t - t0) / tau).exp() + b;
            ss += (r - model) * (r - model);
        }
        (ss, a, b)
    };

    // golden-section search on log10(T)
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut lo = (span * 1e-4).log10();
    let mut hi = (span * 10.0).log10();
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = sq_residual(10f64.powf(x1)).0;
    let mut f2 = sq_residual(10f64.powf(x2)).0;
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = sq_residual(10f64.powf(x1)).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = sq_residual(10f64.powf(x2)).0;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let tau = 10f64.powf(0.5 * (lo + hi));
    let (ss, a, b) = sq_residual(tau);
    Ok(ExpFit {
        amplitude: a,
        time_constant: tau,
        offset: b,
        residual: (ss / n as f64).sqrt(),
        warning: if monotone {
            None
        } else {
            Some("trace is not monotone; exponential fit is unreliable".into())
        },
    })
}

/// Measure the tube radius of a tethered mesh: mean distance from the axis
/// over vertices whose axial coordinate falls inside `[window_lo, window_hi]`
/// (fractions of the axial extent above `axis_origin`).
pub fn measure_tube_radius(
    mesh: &SurfaceMesh,
    axis_origin: &Vec3,
    axis_direction: &Vec3,
    window_lo: f64,
    window_hi: f64,
) -> Result<f64> {
    let axis = axis_direction.normalize();
    let mut smin = f64::INFINITY;
    let mut smax = f64::NEG_INFINITY;
    for p in mesh.positions() {
        let s = (p - axis_origin).dot(&axis);
        smin = smin.min(s);
        smax = smax.max(s);
    }
    if !(smax > 0.0) {
        return Err(Error::Parameter("no vertices along the tether axis".into()));
    }
    let lo = window_lo * smax;
    let hi = window_hi * smax;
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in mesh.positions() {
        let rel = p - axis_origin;
        let s = rel.dot(&axis);
        if s >= lo && s <= hi {
            sum += (rel - s * axis).norm();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Parameter("no vertices inside the measurement window".into()));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_radius_matches_reported_values() {
        // non-dimensional 2 pi / F
        for (force, expected) in [(400.0, 0.0157), (500.0, 0.0126), (600.0, 0.0105)] {
            let params = TetherParams::new(force).unwrap();
            let r = r_eq(&params);
            assert!((r - 2.0 * std::f64::consts::PI / force).abs() < 1e-15);
            assert!((r - expected).abs() < 5e-5, "F={force}: {r}");
        }
        assert!(TetherParams::new(0.0).is_err());
        assert!(TetherParams::new(-10.0).is_err());
    }

    #[test]
    fn relaxation_time_matches_reported_values() {
        for (force, expected) in [(500.0, 6.32e-4), (600.0, 4.39e-4)] {
            let params = TetherParams::new(force).unwrap();
            let t = relax_time(&params);
            let formula = 16.0 * std::f64::consts::PI.powi(2) / (force * force);
            assert!((t - formula).abs() < 1e-18);
            assert!((t - expected).abs() < 5e-7, "F={force}: {t}");
        }
        let params = TetherParams::new(400.0).unwrap();
        let formula = 16.0 * std::f64::consts::PI.powi(2) / (400.0 * 400.0);
        assert!((relax_time(&params) - formula).abs() < 1e-18);
    }

    #[test]
    fn equilibrium_surface_pressure() {
        let params = TetherParams::new(400.0).unwrap();
        let pi_eq = surface_pressure_eq(&params);
        assert!((pi_eq + 400.0 * 400.0 / (8.0 * std::f64::consts::PI.powi(2))).abs() < 1e-10);
        assert!((pi_eq + 2026.4).abs() < 0.1, "{pi_eq}");
        // always negative, and consistent with -F/(4 pi R_eq)
        for force in [50.0, 400.0, 123.4] {
            let p = TetherParams::new(force).unwrap();
            let via_radius = -force / (4.0 * std::f64::consts::PI * r_eq(&p));
            assert!(surface_pressure_eq(&p) < 0.0);
            assert!((surface_pressure_eq(&p) - via_radius).abs() < 1e-12 * via_radius.abs());
        }
    }

    #[test]
    fn fixed_point_stays_fixed() {
        let params = TetherParams::new(500.0).unwrap();
        let r = r_eq(&params);
        let trace = integrate_radius(&params, r, 10.0 * relax_time(&params), 1e-10).unwrap();
        for &(_, radius) in &trace.samples {
            assert!((radius - r).abs() < 1e-12 * r);
        }
    }

    #[test]
    fn force_step_converges_to_new_radius() {
        // start at the F=400 radius, pull with F=500
        let params = TetherParams::new(500.0).unwrap();
        let r0 = 2.0 * std::f64::consts::PI / 400.0;
        let trace = integrate_radius(&params, r0, 20.0 * relax_time(&params), 1e-10).unwrap();
        let target = r_eq(&params);
        assert!((trace.final_radius() - target).abs() < 1e-8);
        // monotone decrease toward equilibrium
        for w in trace.samples.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-13);
            assert!(w[1].1 >= target - 1e-12);
        }
    }

    /// Closed-form implicit solution of the separable radius ODE.
    fn implicit_time(params: &TetherParams, r0: f64, r: f64) -> f64 {
        let req = r_eq(params);
        let c = params.bending_modulus;
        -(4.0 * params.mu / c) * req * ((r - r0) + req * ((r - req) / (r0 - req)).ln())
    }

    #[test]
    fn integration_matches_implicit_solution() {
        let mut rng_state = 0x1234_5678_u64;
        let mut next = || {
            // xorshift, deterministic across platforms
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let force = 100.0 + 900.0 * next();
            let params = TetherParams::new(force).unwrap();
            let req = r_eq(&params);
            // random start on either side of equilibrium, away from the
            // singular approach window
            let r0 = req * (0.3 + 2.0 * next());
            if (r0 - req).abs() < 1e-3 * req {
                continue;
            }
            let t_end = 3.0 * relax_time(&params);
            let trace = integrate_radius(&params, r0, t_end, 1e-9).unwrap();
            let mut checked = 0;
            for &(t, r) in trace.samples.iter().skip(1) {
                if (r - req).abs() < 1e-8 * req {
                    continue;
                }
                let t_exact = implicit_time(&params, r0, r);
                assert!(
                    (t - t_exact).abs() <= 1e-6 * t_exact.max(1e-12),
                    "F={force} r0={r0}: t={t} exact={t_exact}"
                );
                checked += 1;
            }
            assert!(checked > 5);
            // monotone and bounded
            let increasing = r0 < req;
            for w in trace.samples.windows(2) {
                if increasing {
                    assert!(w[1].1 >= w[0].1 - 1e-13);
                    assert!(w[1].1 <= req + 1e-9);
                } else {
                    assert!(w[1].1 <= w[0].1 + 1e-13);
                    assert!(w[1].1 >= req - 1e-9);
                }
            }
        }
    }

    #[test]
    fn scaling_invariance_of_nondimensional_traces() {
        // scaling (c, mu) by the same factor leaves the trace invariant
        // because the time scale mu R0^2 / c is unchanged
        let base = TetherParams::new(500.0).unwrap();
        let scaled = TetherParams {
            force: 500.0,
            bending_modulus: 3.0,
            mu: 3.0,
            pressure: 0.0,
        };
        // same non-dimensional force means the dimensional force scales by a
        let scaled = TetherParams {
            force: 500.0 * 3.0,
            ..scaled
        };
        let r0 = 0.02;
        let t_end = 2.0 * relax_time(&base);
        let a = integrate_radius(&base, r0, t_end, 1e-10).unwrap();
        let b = integrate_radius(&scaled, r0, t_end, 1e-10).unwrap();
        assert!((r_eq(&base) - r_eq(&scaled)).abs() < 1e-15);
        assert!((a.final_radius() - b.final_radius()).abs() < 1e-9);
    }

    #[test]
    fn exponential_fit_recovers_synthetic_parameters() {
        let (a, tau, b) = (0.004, 6.32e-4, 0.0126);
        let samples: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let t = i as f64 * 2e-5;
                (t, a * (-t / tau).exp() + b)
            })
            .collect();
        let fit = fit_exponential(&TetherTrace { samples }).unwrap();
        assert!(fit.warning.is_none());
        assert!((fit.amplitude - a).abs() < 1e-6 * a);
        assert!((fit.time_constant - tau).abs() < 1e-6 * tau);
        assert!((fit.offset - b).abs() < 1e-6 * b);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn fit_on_integrated_decay_matches_relaxation_time() {
        let params = TetherParams::new(500.0).unwrap();
        let req = r_eq(&params);
        let tau = relax_time(&params);
        // final decade of the decay, where the linearization is valid
        let trace = integrate_radius(&params, 1.1 * req, 6.0 * tau, 1e-11).unwrap();
        let late: Vec<(f64, f64)> = trace
            .samples
            .iter()
            .copied()
            .filter(|&(_, r)| (r - req) < 0.02 * req)
            .collect();
        assert!(late.len() >= 10);
        let fit = fit_exponential(&TetherTrace { samples: late }).unwrap();
        assert!(
            (fit.time_constant - tau).abs() < 0.05 * tau,
            "fit {} vs {}",
            fit.time_constant,
            tau
        );
    }

    #[test]
    fn constant_trace_fits_with_zero_amplitude() {
        let samples: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 1e-4, 0.0126)).collect();
        let fit = fit_exponential(&TetherTrace { samples }).unwrap();
        assert!(fit.amplitude.abs() < 1e-12);
        assert!((fit.offset - 0.0126).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_trace_warns() {
        let samples: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 1e-4;
                (t, 0.01 + 1e-4 * (t * 1e4).sin())
            })
            .collect();
        let fit = fit_exponential(&TetherTrace { samples }).unwrap();
        assert!(fit.warning.is_some());
    }

    #[test]
    fn radius_ode_with_pressure_term() {
        // at R = R_eq and p = 0 the radial velocity vanishes; a positive
        // pressure inflates the tube
        let params = TetherParams::new(400.0).unwrap();
        let req = r_eq(&params);
        assert!(radial_velocity(&params, req).abs() < 1e-14);
        let pressurized = TetherParams {
            pressure: 10.0,
            ..params
        };
        assert!(radial_velocity(&pressurized, req) > 0.0);
    }
}

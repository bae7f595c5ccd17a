//! Dormand–Prince 5(4) embedded Runge–Kutta pair with adaptive step control.
//!
//! The driver is generic over the state size and over the right-hand side's
//! error type: a stage evaluation that fails (for example an implicit solve
//! that finds no root) rejects the step and retries with half the step size,
//! giving up once the step would fall below `h_min`.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order weights minus the embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn new(tol: f64, h_init: f64, h_max: f64) -> Self {
        Self { rtol: tol, atol: tol, h_init, h_min: 1e-14 * h_max.max(1.0), h_max, max_steps: 200_000 }
    }
}

/// What the acceptance callback wants the driver to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// How an integration run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Finish<E> {
    /// Reached the end of the independent-variable interval.
    End,
    /// The acceptance callback asked to stop.
    Stopped,
    /// The step budget ran out.
    MaxSteps,
    /// The error estimate kept the step size below `h_min`.
    StepUnderflow,
    /// A stage evaluation kept failing even at the minimum step size.
    Failed(E),
}

/// Summary of an integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run<E, const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    pub finish: Finish<E>,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` towards `t_end`.
///
/// Every value in `stops` lying strictly between `t0` and `t_end` is hit
/// exactly by an accepted step. `on_accept(t, y, f(t, y))` is called once
/// for every accepted step (not for the initial point).
pub fn integrate<const N: usize, E, F, A>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    stops: &[f64],
    ctl: &StepControl,
    mut on_accept: A,
) -> Run<E, N>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    A: FnMut(f64, &[f64; N], &[f64; N]) -> Flow,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> =
        stops.iter().copied().filter(|s| (s - t0) * dir > 0.0 && (t_end - s) * dir > 0.0).collect();
    stops.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    stops.push(t_end);
    let mut next_stop = 0usize;

    let mut t = t0;
    let mut y = y0;
    let run = |finish, t, y, accepted, rejected| Run { t, y, accepted, rejected, finish };

    let mut k1 = match f(t, &y) {
        Ok(k) => k,
        Err(e) => return run(Finish::Failed(e), t, y, 0, 0),
    };
    let mut h = ctl.h_init.abs().min(ctl.h_max).max(ctl.h_min);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_error: Option<E> = None;

    loop {
        if accepted + rejected >= ctl.max_steps {
            return run(Finish::MaxSteps, t, y, accepted, rejected);
        }
        let target = stops[next_stop];
        let remaining = (target - t) * dir;
        let mut hit_stop = false;
        let mut step = h;
        // Snap onto a stop that is within rounding distance, so no sliver
        // step (or a zero-length one) is needed to reach it.
        if step >= remaining * (1.0 - 1e-9) {
            step = remaining;
            hit_stop = true;
        }
        let hs = step * dir;

        let attempt = (|| -> Result<([f64; N], [f64; N], f64), E> {
            let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = f(t + hs, &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y_new = axpy(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let t_new = if hit_stop { target } else { t + hs };
            let k7 = f(t_new, &y_new)?;
            let mut err = 0.0f64;
            for i in 0..N {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            Ok((y_new, k7, err))
        })();

        match attempt {
            Ok((y_new, k7, err)) if err <= 1.0 && err.is_finite() => {
                t = if hit_stop { target } else { t + hs };
                y = y_new;
                k1 = k7;
                accepted += 1;
                last_error = None;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Do not let a short stop-limited step shrink the next one.
                h = (h.max(step) * fac).min(ctl.h_max);
                if on_accept(t, &y, &k1) == Flow::Stop {
                    return run(Finish::Stopped, t, y, accepted, rejected);
                }
                if hit_stop {
                    next_stop += 1;
                    if next_stop == stops.len() {
                        return run(Finish::End, t, y, accepted, rejected);
                    }
                }
            }
            Ok((_, _, err)) => {
                rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
                h = step * fac;
            }
            Err(e) => {
                rejected += 1;
                last_error = Some(e);
                h = step * 0.5;
            }
        }
        if h < ctl.h_min {
            let finish = match last_error.take() {
                Some(e) => Finish::Failed(e),
                None => Finish::StepUnderflow,
            };
            return run(finish, t, y, accepted, rejected);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_decay(tol: f64) -> f64 {
        let ctl = StepControl::new(tol, 1e-3, 1.0);
        let r = integrate::<1, (), _, _>(|_, y| Ok([-y[0]]), 0.0, [1.0], 2.0, &[], &ctl, |_, _, _| Flow::Continue);
        assert_eq!(r.finish, Finish::End);
        assert_eq!(r.t, 2.0);
        (r.y[0] - (-2f64).exp()).abs()
    }

    #[test]
    fn reproduces_exponential() {
        assert!(exp_decay(1e-10) < 1e-9);
    }

    #[test]
    fn error_shrinks_with_tolerance() {
        assert!(exp_decay(1e-12) < exp_decay(1e-6));
    }

    #[test]
    fn harmonic_oscillator_hits_stops_exactly() {
        let ctl = StepControl::new(1e-11, 1e-2, 0.5);
        let stops = [0.3, 1.0, 2.5];
        let mut seen = Vec::new();
        let r = integrate::<2, (), _, _>(
            |_, y| Ok([y[1], -y[0]]),
            0.0,
            [0.0, 1.0],
            3.0,
            &stops,
            &ctl,
            |t, y, _| {
                if stops.contains(&t) {
                    seen.push((t, y[0]));
                }
                Flow::Continue
            },
        );
        assert_eq!(r.finish, Finish::End);
        assert_eq!(seen.len(), 3);
        for (t, s) in seen {
            assert!((s - t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn failing_rhs_is_reported() {
        let ctl = StepControl::new(1e-8, 0.1, 0.1);
        let r = integrate::<1, &str, _, _>(
            |t, y| if t > 0.5 { Err("wall") } else { Ok([y[0]]) },
            0.0,
            [1.0],
            1.0,
            &[],
            &ctl,
            |_, _, _| Flow::Continue,
        );
        assert_eq!(r.finish, Finish::Failed("wall"));
        assert!(r.t <= 0.5 && r.t > 0.49);
    }

    #[test]
    fn blow_up_underflows() {
        // y' = y² from y(0) = 1 blows up at t = 1.
        let ctl = StepControl::new(1e-10, 1e-3, 0.1);
        let r =
            integrate::<1, (), _, _>(|_, y| Ok([y[0] * y[0]]), 0.0, [1.0], 2.0, &[], &ctl, |_, _, _| Flow::Continue);
        assert!(matches!(r.finish, Finish::StepUnderflow | Finish::MaxSteps));
        assert!(r.t < 1.0 && r.t > 0.99);
    }
}

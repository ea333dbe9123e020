//! Adaptive Dormand–Prince 5(4) integration with a quartic dense output,
//! used by the shooting solver. Sign-change events are located on the dense
//! polynomial by safeguarded bisection to machine accuracy.

use crate::error::CoreError;
use crate::Result;

/// One accepted step with per-component dense-output coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    /// `rcont[c] = [c1, c2, c3, c4, c5]` for component `c`.
    pub rcont: Vec<[f64; 5]>,
}

impl DenseStep {
    /// Evaluate component `comp` at `t` in `[t0, t1]`.
    pub fn eval(&self, comp: usize, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let theta = ((t - self.t0) / h).clamp(0.0, 1.0);
        let c = &self.rcont[comp];
        c[0] + theta * (c[1] + (1.0 - theta) * (c[2] + theta * (c[3] + (1.0 - theta) * c[4])))
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1
    }
}

/// Instruction returned by the step callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

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
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrate `y' = f(t, y)` from `t0` to at most `t_max`, invoking `on_step`
/// after every accepted step. Integration stops early when the callback
/// returns [`StepControl::Stop`].
pub fn dopri5<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_max: f64,
    dt0: f64,
    rtol: f64,
    atol: f64,
    max_steps: usize,
    mut on_step: impl FnMut(&DenseStep, &[f64]) -> StepControl,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut dt = dt0.min(t_max - t0).max(f64::MIN_POSITIVE);
    let mut k1 = vec![0.0; dim];
    f(t, &y, &mut k1);
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];

    let mut steps = 0usize;
    while t < t_max {
        if steps >= max_steps {
            return Err(CoreError::no_convergence(
                "dopri5",
                format!("step budget {max_steps} exhausted at t = {t}"),
            ));
        }
        steps += 1;
        dt = dt.min(t_max - t);

        for i in 0..dim {
            ytmp[i] = y[i] + dt * A21 * k1[i];
        }
        f(t + C2 * dt, &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + dt * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * dt, &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + dt * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * dt, &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + dt * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * dt, &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] = y[i]
                + dt * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + dt, &ytmp, &mut k6);
        for i in 0..dim {
            ynew[i] =
                y[i] + dt * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t + dt, &ynew, &mut k7);

        let mut err = 0.0;
        for i in 0..dim {
            let e = dt
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = atol + rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / dim as f64).sqrt();

        if err <= 1.0 {
            // accepted: build dense output
            let mut rcont = Vec::with_capacity(dim);
            for i in 0..dim {
                let ydiff = ynew[i] - y[i];
                let bspl = dt * k1[i] - ydiff;
                let r5 = dt
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
                rcont.push([y[i], ydiff, bspl, ydiff - dt * k7[i] - bspl, r5]);
            }
            let step = DenseStep { t0: t, t1: t + dt, rcont };
            t += dt;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7); // FSAL
            if on_step(&step, &y) == StepControl::Stop {
                return Ok((t, y));
            }
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        dt *= fac;
        if !dt.is_finite() || dt <= 0.0 {
            return Err(CoreError::no_convergence("dopri5", "step size collapsed"));
        }
    }
    Ok((t, y))
}

/// Locate a simple root of dense component `comp` inside a step whose
/// endpoint values change sign. Plain bisection; ~60 iterations reach
/// machine accuracy.
pub fn root_in_step(step: &DenseStep, comp: usize, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = step.eval(comp, lo);
    let fhi = step.eval(comp, hi);
    debug_assert!(flo * fhi <= 0.0, "no sign change in step");
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = step.eval(comp, mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn exponential_decay_is_accurate() {
        let (t, y) = dopri5(
            |_t, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            5.0,
            1e-3,
            1e-12,
            1e-14,
            100_000,
            |_, _| StepControl::Continue,
        )
        .unwrap();
        assert_relative_eq!(t, 5.0);
        assert_relative_eq!(y[0], (-5.0_f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn dense_output_matches_trajectory() {
        let mut steps = Vec::new();
        dopri5(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            7.0,
            1e-2,
            1e-12,
            1e-14,
            100_000,
            |s, _| {
                steps.push(s.clone());
                StepControl::Continue
            },
        )
        .unwrap();
        for s in &steps {
            for j in 0..=8 {
                let t = s.t0 + (s.t1 - s.t0) * j as f64 / 8.0;
                assert!((s.eval(0, t) - t.cos()).abs() < 1e-9, "cos dense at {t}");
                assert!((s.eval(1, t) + t.sin()).abs() < 1e-9, "sin dense at {t}");
            }
        }
    }

    #[test]
    fn root_location_finds_pi_over_two() {
        let mut root = None;
        dopri5(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            4.0,
            1e-2,
            1e-12,
            1e-14,
            100_000,
            |s, y| {
                if root.is_none() && s.eval(0, s.t0) > 0.0 && y[0] <= 0.0 {
                    root = Some(root_in_step(s, 0, s.t0, s.t1));
                    return StepControl::Stop;
                }
                StepControl::Continue
            },
        )
        .unwrap();
        assert_relative_eq!(root.unwrap(), PI / 2.0, epsilon = 1e-11);
    }
}

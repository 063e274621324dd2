//! Adaptive Dormand–Prince 5(4) integrator with dense output.
//!
//! Written against fixed-size state arrays; the geodesic equation uses N = 4
//! and the joint geodesic + Jacobi system N = 8. Steps may run in either
//! time direction (the step size carries the sign).

use crate::{Error, Result};

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
// embedded error coefficients e_i = b_i − b*_i
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], pairs: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in pairs {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One accepted step with its 4th-order interpolation polynomial.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Interpolated state at `t`; valid for `t` within the step.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            let c = &self.cont;
            out[i] = c[0][i]
                + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        out
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn contains(&self, t: f64) -> bool {
        let th = (t - self.t0) / self.h;
        (-1e-12..=1.0 + 1e-12).contains(&th)
    }
}

/// Dense trajectory made of accepted steps, monotone in `t0 → t_end`.
#[derive(Debug, Clone, Default)]
pub struct DenseSolution<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub n_rhs_evals: usize,
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t_end())
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        debug_assert!(!self.steps.is_empty());
        // binary search on step start times, robust to either direction
        let forward = self.steps.last().map_or(true, |s| s.h >= 0.0);
        let idx = self
            .steps
            .partition_point(|s| {
                if forward {
                    s.t_end() < t
                } else {
                    s.t_end() > t
                }
            })
            .min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }
}

/// Tolerances and guard rails for the adaptive stepper.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            atol: 1e-10,
            rtol: 1e-10,
            h_init: 1e-3,
            h_max: 0.25,
            max_steps: 200_000,
        }
    }
}

/// Adaptive stepper; `dir = ±1` selects the time direction.
pub struct Stepper<'a, F, const N: usize>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    rhs: &'a F,
    pub t: f64,
    pub y: [f64; N],
    h: f64,
    k_last: Option<[f64; N]>,
    control: StepControl,
    pub steps_taken: usize,
    pub rhs_evals: usize,
}

impl<'a, F, const N: usize> Stepper<'a, F, N>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    pub fn new(rhs: &'a F, t0: f64, y0: [f64; N], dir: f64, control: StepControl) -> Self {
        Stepper {
            rhs,
            t: t0,
            y: y0,
            h: control.h_init.copysign(dir),
            k_last: None,
            control,
            steps_taken: 0,
            rhs_evals: 0,
        }
    }

    /// Advance by one accepted step and return its dense interpolant.
    pub fn step(&mut self) -> Result<DenseStep<N>> {
        let f = self.rhs;
        let k1 = match self.k_last.take() {
            Some(k) => k,
            None => {
                self.rhs_evals += 1;
                f(self.t, &self.y)?
            }
        };
        loop {
            self.steps_taken += 1;
            if self.steps_taken > self.control.max_steps {
                return Err(Error::Escape { t: self.t });
            }
            let h = self.h;
            if h.abs() < 1e-14 * (1.0 + self.t.abs()) {
                return Err(Error::Stiffness { t: self.t, h });
            }
            let t = self.t;
            let y = &self.y;
            self.rhs_evals += 6;
            let k2 = f(t + C2 * h, &axpy(y, &[(A21, &k1)], h))?;
            let k3 = f(t + C3 * h, &axpy(y, &[(A31, &k1), (A32, &k2)], h))?;
            let k4 = f(t + C4 * h, &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h))?;
            let k5 = f(
                t + C5 * h,
                &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
            )?;
            let k6 = f(
                t + h,
                &axpy(
                    y,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                    h,
                ),
            )?;
            let y1 = axpy(
                y,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                h,
            );
            let k7 = f(t + h, &y1)?;

            // scaled RMS error estimate
            let mut err = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = self.control.atol
                    + self.control.rtol * y[i].abs().max(y1[i].abs());
                err += (e / sc) * (e / sc);
            }
            err = (err / N as f64).sqrt();

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                // accept: assemble dense output
                let delta: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
                let cont3: [f64; N] = std::array::from_fn(|i| h * k1[i] - delta[i]);
                let cont4: [f64; N] =
                    std::array::from_fn(|i| delta[i] - h * k7[i] - cont3[i]);
                let cont5: [f64; N] = std::array::from_fn(|i| {
                    h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i])
                });
                let dense = DenseStep {
                    t0: t,
                    h,
                    cont: [*y, delta, cont3, cont4, cont5],
                };
                self.t = t + h;
                self.y = y1;
                self.k_last = Some(k7);
                self.h = (factor * h).clamp(
                    -self.control.h_max,
                    self.control.h_max,
                );
                if self.h == 0.0 {
                    self.h = h;
                }
                return Ok(dense);
            }
            self.h = factor * h;
            self.k_last = Some(k1);
            // keep k1: rejected step does not move the state
            let _ = &k2;
        }
    }

    /// Clamp the upcoming step so it lands exactly on `t_target`.
    pub fn clamp_to(&mut self, t_target: f64) {
        let remaining = t_target - self.t;
        if remaining == 0.0 {
            return;
        }
        if self.h.abs() > remaining.abs() {
            self.h = remaining;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_harmonic_oscillator() {
        let rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], -y[0]]) };
        let mut st = Stepper::new(&rhs, 0.0, [1.0, 0.0], 1.0, StepControl::default());
        let mut sol = DenseSolution::default();
        while st.t < 6.0 {
            st.clamp_to(6.0);
            sol.steps.push(st.step().unwrap());
        }
        let y = sol.eval(std::f64::consts::PI);
        assert!((y[0] + 1.0).abs() < 1e-9, "{y:?}");
        assert!(y[1].abs() < 1e-9);
        // dense output mid-step accuracy
        let y = sol.eval(1.234);
        assert!((y[0] - 1.234f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn integrates_backward() {
        let rhs = |_t: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([y[0]]) };
        let mut st = Stepper::new(&rhs, 0.0, [1.0], -1.0, StepControl::default());
        while st.t > -1.0 {
            st.clamp_to(-1.0);
            st.step().unwrap();
        }
        assert!((st.y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }
}

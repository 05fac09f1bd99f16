//! Dormand–Prince 5(4) pair with the standard fourth-order continuous
//! extension and a proportional-integral step controller.

use crate::error::{Error, Result};

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

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

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const MIN_SHRINK: f64 = 0.2;
const MAX_GROW: f64 = 10.0;

/// Relative and absolute local error tolerances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12 }
    }
}

/// One accepted step with its dense-output coefficients.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    /// Scaled local error estimate (accepted when `<= 1`).
    pub err: f64,
    rcont: [[f64; N]; 4],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Dense output at `t` in `[t0, t0 + h]`; reproduces both nodes exactly.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        if t == self.t0 {
            return self.y0;
        }
        if t == self.t1() {
            return self.y1;
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r2, r3, r4, r5] = &self.rcont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.y0[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
        out
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

pub(crate) struct Stepper<const N: usize, F> {
    rhs: F,
    pub t: f64,
    pub y: [f64; N],
    k1: [f64; N],
    h: f64,
    facold: f64,
    tol: Tolerances,
    min_step: f64,
    pub nfev: usize,
    rejected_last: bool,
}

impl<const N: usize, F> Stepper<N, F>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    /// `span` sets the scale of the step-underflow threshold `1e-14·span`
    /// and caps the initial step.
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], span: f64, tol: Tolerances) -> Result<Self> {
        let k1 = rhs(t0, &y0)?;
        let mut s = Stepper {
            rhs,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            facold: 1e-4,
            tol,
            min_step: 1e-14 * span.abs().max(f64::MIN_POSITIVE),
            nfev: 1,
            rejected_last: false,
        };
        s.h = s.initial_step(span)?;
        Ok(s)
    }

    fn rms(&self, v: &[f64; N], reference: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sk = self.tol.atol + self.tol.rtol * reference[i].abs();
            acc += (v[i] / sk).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step(&mut self, span: f64) -> Result<f64> {
        let d0 = self.rms(&self.y, &self.y);
        let d1 = self.rms(&self.k1, &self.y);
        let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span.abs());
        let y1 = axpy(&self.y, h0, &[(1.0, &self.k1)]);
        let f1 = (self.rhs)(self.t + h0, &y1)?;
        self.nfev += 1;
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - self.k1[i];
        }
        let d2 = self.rms(&diff, &self.y) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(span.abs()))
    }

    /// Advance by one accepted step, never past `t_stop`.
    pub fn step(&mut self, t_stop: f64) -> Result<Step<N>> {
        loop {
            let remaining = t_stop - self.t;
            let mut h = self.h.min(remaining);
            if remaining - h <= 1e-3 * h {
                h = remaining;
            }
            if h < self.min_step && h < remaining {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let (t, y, k1) = (self.t, self.y, self.k1);
            let rhs = &mut self.rhs;
            let k2 = rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = rhs(
                t + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = rhs(
                t + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = rhs(t + h, &y1)?;
            self.nfev += 6;

            let mut err = 0.0f64;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.tol.atol + self.tol.rtol * y[i].abs().max(y1[i].abs());
                err = err.max((e / sk).abs());
            }
            if !err.is_finite() {
                self.h = h * MIN_SHRINK;
                self.rejected_last = true;
                continue;
            }

            let fac11 = err.max(1e-300).powf(EXPO);
            if err <= 1.0 {
                let fac = (fac11 / self.facold.powf(BETA) / SAFETY).clamp(1.0 / MAX_GROW, 1.0 / MIN_SHRINK);
                let mut hnew = h / fac;
                if self.rejected_last {
                    hnew = hnew.min(h);
                }
                self.facold = err.max(1e-4);
                self.rejected_last = false;

                let mut rcont = [[0.0; N]; 4];
                for i in 0..N {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = ydiff;
                    rcont[1][i] = bspl;
                    rcont[2][i] = ydiff - h * k7[i] - bspl;
                    rcont[3][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let step = Step {
                    t0: t,
                    h,
                    y0: y,
                    y1,
                    err,
                    rcont,
                };
                self.t = if h == remaining { t_stop } else { t + h };
                self.y = y1;
                self.k1 = k7;
                self.h = hnew;
                return Ok(step);
            }
            self.h = h / (fac11 / SAFETY).min(1.0 / MIN_SHRINK);
            self.rejected_last = true;
        }
    }
}

//! Adaptive Dormand–Prince 5(4) integration for small autonomous-in-form
//! systems `y' = f(t, y)`.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

/// Adaptive integrator state; the step size carries over between calls so
/// that integrating across many output nodes stays cheap.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    pub tol: Tolerance,
    h: f64,
    pub steps: usize,
}

impl DormandPrince {
    pub fn new(tol: Tolerance, h0: f64) -> Self {
        DormandPrince { tol, h: h0, steps: 0 }
    }

    /// Advance `y` from `t0` to `t1 > t0` exactly.
    pub fn integrate<const N: usize, F>(&mut self, f: &F, t0: f64, y: &mut [f64; N], t1: f64)
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut t = t0;
        while t < t1 {
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            let mut k = [[0.0; N]; 7];
            k[0] = f(t, y);
            for s in 1..7 {
                let mut ys = *y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for i in 0..N {
                        ys[i] += h * A[s][j] * kj[i];
                    }
                }
                k[s] = f(t + C[s] * h, &ys);
            }
            let mut y_new = *y;
            let mut err = 0.0_f64;
            for i in 0..N {
                let mut hi = 0.0;
                let mut lo = 0.0;
                for s in 0..7 {
                    hi += B[s] * k[s][i];
                    lo += B_LOW[s] * k[s][i];
                }
                y_new[i] += h * hi;
                let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((h * (hi - lo)).abs() / scale);
            }
            self.steps += 1;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                *y = y_new;
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut y = [1.0, 0.0];
        let mut dp = DormandPrince::new(Tolerance { rtol: 1e-13, atol: 1e-15 }, 1e-3);
        let two_pi = 2.0 * std::f64::consts::PI;
        for j in 0..100 {
            dp.integrate(&f, two_pi * j as f64 / 100.0, &mut y, two_pi * (j + 1) as f64 / 100.0);
        }
        assert!((y[0] - 1.0).abs() < 1e-11 && y[1].abs() < 1e-11, "{y:?}");
    }
}

//! Adaptive Dormand–Prince 5(4) integrator for complex linear systems.

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the first derivative when `None`.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

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
// b − b̂ (fifth minus fourth order weights).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += *w * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Integrates `y' = f(t, y)` from `t0`, calling `on_sample(index, t, y)` at
/// every time in `t_out` (ascending, all `≥ t0`). Steps are clipped so that
/// sample times are hit exactly.
pub fn integrate<F, S>(
    mut f: F,
    t0: f64,
    y0: &[C64],
    t_out: &[f64],
    opts: OdeOptions,
    mut on_sample: S,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    S: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParameter(
            "output times must be ascending and >= t0".into(),
        ));
    }
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut tmp = k1.clone();
    let mut y_new = k1.clone();

    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut h = opts.h_init.unwrap_or_else(|| {
        let scale = |v: &[C64], z: &[C64]| {
            (v.iter()
                .zip(z)
                .map(|(a, b)| (a.norm() / (opts.atol + opts.rtol * b.norm())).powi(2))
                .sum::<f64>()
                / n.max(1) as f64)
                .sqrt()
        };
        let d0 = scale(&y, &y);
        let d1 = scale(&k1, &y);
        if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
    });

    let mut next = 0;
    while next < t_out.len() && t_out[next] <= t {
        on_sample(next, t, &y)?;
        next += 1;
    }

    while next < t_out.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let target = t_out[next];
        let mut clipped = false;
        let h_natural = h;
        if t + h >= target {
            h = target - t;
            clipped = true;
        }

        combo(&mut tmp, &y, h, &[(A21, &k1)]);
        f(t + C2 * h, &tmp, &mut k2);
        combo(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &tmp, &mut k3);
        combo(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * h, &tmp, &mut k4);
        combo(
            &mut tmp,
            &y,
            h,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        );
        f(t + C5 * h, &tmp, &mut k5);
        combo(
            &mut tmp,
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        f(t + h, &tmp, &mut k6);
        combo(
            &mut y_new,
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        f(t + h, &y_new, &mut k7);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();

        if err <= 1.0 {
            t = if clipped { target } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            while next < t_out.len() && t_out[next] <= t {
                on_sample(next, t, &y)?;
                next += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // A clipped step says nothing about the natural step size.
            h = if clipped {
                h_natural.max(h * factor)
            } else {
                h * factor
            };
        } else {
            stats.rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
            if h < opts.h_min {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_exponential() {
        let lambda = C64::new(-0.3, 2.0);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let mut worst: f64 = 0.0;
        integrate(
            |_, y, dy| dy[0] = lambda * y[0],
            0.0,
            &[C64::new(1.0, 0.0)],
            &times,
            OdeOptions::default(),
            |_, t, y| {
                worst = worst.max((y[0] - (lambda * t).exp()).norm());
                Ok(())
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn samples_hit_requested_times() {
        let times = [0.0, 0.1, 0.1, 1.0, 3.5];
        let mut seen = Vec::new();
        integrate(
            |_, _, dy| dy[0] = C64::new(1.0, 0.0),
            0.0,
            &[C64::new(0.0, 0.0)],
            &times,
            OdeOptions::default(),
            |i, t, y| {
                seen.push((i, t));
                assert!((y[0].re - t).abs() < 1e-12);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(
            seen.iter().map(|s| s.0).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(seen[4].1, 3.5);
    }

    #[test]
    fn rejects_unsorted_times() {
        let r = integrate(
            |_, _, _| {},
            0.0,
            &[C64::new(0.0, 0.0)],
            &[1.0, 0.5],
            OdeOptions::default(),
            |_, _, _| Ok(()),
        );
        assert!(r.is_err());
    }

    #[test]
    fn step_underflow_is_reported() {
        let opts = OdeOptions {
            max_steps: 5,
            ..Default::default()
        };
        let r = integrate(
            |_, y, dy| dy[0] = C64::new(0.0, 50.0) * y[0],
            0.0,
            &[C64::new(1.0, 0.0)],
            &[100.0],
            opts,
            |_, _, _| Ok(()),
        );
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. })));
    }
}

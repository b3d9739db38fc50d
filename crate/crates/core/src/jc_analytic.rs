//! Closed-form Jaynes–Cummings spectrum with two-photon relaxation, and its
//! comparison against the open Rabi spectrum.
//!
//! Doublet `n ≥ 1` spans `{|n−1,e⟩, |n,g⟩}`:
//!
//! ```text
//! ω_± = (n − ½) ν_c − i (n−1)² κ_c2 ± ½ √([ν_c − ν_q − 2i(n−1) κ_c2]² + 4 g² n)
//! ```
//!
//! with the principal square root. The `+` root carries the label of
//! `|n,g⟩` and the `−` root that of `|n−1,e⟩`; both have parity `(−1)^n`.

use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, ParitySector, TruncationConfig};
use crate::spectrum::{track_levels_over_sweep, LevelTracking};
use crate::{Result, C64};

/// Window on which the large-coupling decay slope is fitted.
pub const PLATEAU_WINDOW: (f64, f64) = (2.0, 4.0);
/// `|dκ/dg|` below this fraction of κ_c2 counts as a plateau.
pub const PLATEAU_THRESHOLD: f64 = 0.02;

/// A JC level identified by its number-parity index at `g = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JcLabel {
    /// Boson number `m` of the bare state in the number-parity basis.
    pub m: usize,
    pub parity: ParitySector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcLevelPair {
    pub n: usize,
    /// `+` root, label `(n, (−1)^n)`.
    pub omega_upper: C64,
    /// `−` root, label `(n−1, (−1)^n)`.
    pub omega_lower: C64,
}

impl JcLevelPair {
    pub fn upper_label(&self) -> JcLabel {
        JcLabel {
            m: self.n,
            parity: ParitySector::of_power(self.n),
        }
    }

    pub fn lower_label(&self) -> JcLabel {
        JcLabel {
            m: self.n - 1,
            parity: ParitySector::of_power(self.n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JcLevels {
    /// `|0,g⟩`, decoupled from everything.
    Singlet(C64),
    Doublet(JcLevelPair),
}

impl JcLevels {
    pub fn omegas(&self) -> Vec<(JcLabel, C64)> {
        match self {
            JcLevels::Singlet(w) => vec![(
                JcLabel {
                    m: 0,
                    parity: ParitySector::Even,
                },
                *w,
            )],
            JcLevels::Doublet(pair) => vec![
                (pair.upper_label(), pair.omega_upper),
                (pair.lower_label(), pair.omega_lower),
            ],
        }
    }
}

pub fn jc_eigenfrequencies(params: &ModelParams, n: usize) -> JcLevels {
    if n == 0 {
        return JcLevels::Singlet(C64::new(-0.5 * params.nu_q(), 0.0));
    }
    let nf = n as f64;
    let k = params.kappa_c2();
    let (nu_c, nu_q, g) = (params.nu_c(), params.nu_q(), params.g());
    let centre = C64::new((nf - 0.5) * nu_c, -(nf - 1.0).powi(2) * k);
    let detuning = C64::new(nu_c - nu_q, -2.0 * (nf - 1.0) * k);
    let root = (detuning * detuning + 4.0 * g * g * nf).sqrt();
    JcLevels::Doublet(JcLevelPair {
        n,
        omega_upper: centre + 0.5 * root,
        omega_lower: centre - 0.5 * root,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub g: f64,
    pub label: JcLabel,
    /// Rabi branch index `n_g` anchored to the same bare state.
    pub n_g: usize,
    pub omega_jc: C64,
    pub omega_rabi: C64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecaySlope {
    pub label: JcLabel,
    pub n_g: usize,
    /// Least-squares `dκ/dg` on [`PLATEAU_WINDOW`], `None` with fewer than
    /// three grid points inside it.
    pub jc_slope: Option<f64>,
    pub rabi_slope: Option<f64>,
    pub jc_plateau: bool,
    /// Rabi decay rate strictly increasing at every grid step in the window.
    pub rabi_increasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JcComparison {
    pub g_grid: Vec<f64>,
    pub rows: Vec<ComparisonRow>,
    pub slopes: Vec<DecaySlope>,
}

/// Least-squares slope of `y(x)` over points with `x` in `[lo, hi]`.
pub fn window_slope(x: &[f64], y: &[f64], (lo, hi): (f64, f64)) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&xi, _)| xi >= lo - 1e-12 && xi <= hi + 1e-12)
        .map(|(&a, &b)| (a, b))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Rank of the bare level `(m, p)` within its parity block at `g = 0`.
fn bare_rank(params: &ModelParams, label: JcLabel, trunc: TruncationConfig) -> usize {
    let energy = |m: usize| {
        m as f64 * params.nu_c()
            - 0.5 * label.parity.sign() * ParitySector::of_power(m).sign() * params.nu_q()
    };
    let e = energy(label.m);
    (0..trunc.block_dim())
        .filter(|&m| m != label.m)
        .filter(|&m| energy(m) < e || (energy(m) == e && m < label.m))
        .count()
}

/// JC doublets `1..=n_doublets` (and the singlet) next to the Rabi branches
/// anchored to the same bare states, on a common `g_grid` starting at 0.
pub fn jc_vs_rabi_comparison(
    params_template: &ModelParams,
    g_grid: &[f64],
    trunc: TruncationConfig,
    n_doublets: usize,
) -> Result<JcComparison> {
    let tracks: Vec<LevelTracking> = ParitySector::BOTH
        .iter()
        .map(|&p| track_levels_over_sweep(params_template, p, g_grid, trunc))
        .collect::<Result<_>>()?;

    let mut labels = vec![JcLabel {
        m: 0,
        parity: ParitySector::Even,
    }];
    for n in 1..=n_doublets {
        labels.push(JcLabel {
            m: n,
            parity: ParitySector::of_power(n),
        });
        labels.push(JcLabel {
            m: n - 1,
            parity: ParitySector::of_power(n),
        });
    }

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for label in labels {
        let n_g = bare_rank(params_template, label, trunc);
        let branch = &tracks[label.parity.block_index()].branches[n_g];
        // Which doublet index contains this label, and whether it is the + root.
        let (n, upper) = if label.parity == ParitySector::of_power(label.m) {
            (label.m, true)
        } else {
            (label.m + 1, false)
        };
        let mut jc_decay = Vec::with_capacity(g_grid.len());
        for (k, &g) in g_grid.iter().enumerate() {
            let params = params_template.with_g(g)?;
            let omega_jc = match jc_eigenfrequencies(&params, n) {
                JcLevels::Singlet(w) => w,
                JcLevels::Doublet(pair) if upper => pair.omega_upper,
                JcLevels::Doublet(pair) => pair.omega_lower,
            };
            jc_decay.push(-omega_jc.im);
            rows.push(ComparisonRow {
                g,
                label,
                n_g,
                omega_jc,
                omega_rabi: branch.omega[k],
            });
        }
        let rabi_decay = branch.decay_rates();
        let jc_slope = window_slope(g_grid, &jc_decay, PLATEAU_WINDOW);
        let rabi_slope = window_slope(g_grid, &rabi_decay, PLATEAU_WINDOW);
        let in_window: Vec<f64> = g_grid
            .iter()
            .zip(&rabi_decay)
            .filter(|(&g, _)| g >= PLATEAU_WINDOW.0 - 1e-12 && g <= PLATEAU_WINDOW.1 + 1e-12)
            .map(|(_, &d)| d)
            .collect();
        let threshold = PLATEAU_THRESHOLD * params_template.kappa_c2();
        slopes.push(DecaySlope {
            label,
            n_g,
            jc_slope,
            rabi_slope,
            jc_plateau: jc_slope.is_some_and(|s| s.abs() < threshold),
            rabi_increasing: in_window.len() >= 2 && in_window.windows(2).all(|w| w[1] > w[0]),
        });
    }
    Ok(JcComparison {
        g_grid: g_grid.to_vec(),
        rows,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_jc_block;

    fn eig2(m: &nalgebra::Matrix2<C64>) -> (C64, C64) {
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (tr * tr - 4.0 * det).sqrt();
        ((tr + disc) / 2.0, (tr - disc) / 2.0)
    }

    #[test]
    fn singlet() {
        let p = ModelParams::reference();
        assert_eq!(
            jc_eigenfrequencies(&p, 0),
            JcLevels::Singlet(C64::new(-0.4, 0.0))
        );
    }

    #[test]
    fn vacuum_rabi_splitting() {
        let g = 0.13;
        let p = ModelParams::new(1.0, 1.0, g, 0.0).unwrap();
        let JcLevels::Doublet(pair) = jc_eigenfrequencies(&p, 1) else {
            panic!()
        };
        assert!((pair.omega_upper - C64::new(0.5 + g, 0.0)).norm() < 1e-15);
        assert!((pair.omega_lower - C64::new(0.5 - g, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decoupled_limit() {
        let p = ModelParams::new(1.0, 0.8, 0.0, 0.0).unwrap();
        for n in 1..10 {
            let JcLevels::Doublet(pair) = jc_eigenfrequencies(&p, n) else {
                panic!()
            };
            let nf = n as f64;
            assert!((pair.omega_upper.re - (nf - 0.4)).abs() < 1e-14);
            assert!((pair.omega_lower.re - (nf - 1.0 + 0.4)).abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_block_eigensolve() {
        let p = ModelParams::new(1.0, 0.8, 0.5, 1.0 / 40.0).unwrap();
        let block = build_jc_block(&p, 3).unwrap();
        let (a, b) = eig2(&block);
        let JcLevels::Doublet(pair) = jc_eigenfrequencies(&p, 3) else {
            panic!()
        };
        let direct = (pair.omega_upper - a)
            .norm()
            .max((pair.omega_lower - b).norm());
        let swapped = (pair.omega_upper - b)
            .norm()
            .max((pair.omega_lower - a).norm());
        assert!(direct.min(swapped) < 1e-12);
    }

    #[test]
    fn slope_fit() {
        let x: Vec<f64> = (0..41).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        assert!((window_slope(&x, &y, (2.0, 4.0)).unwrap() - 3.0).abs() < 1e-12);
        assert!(window_slope(&x, &y, (5.0, 6.0)).is_none());
    }

    #[test]
    fn bare_ranks() {
        let p = ModelParams::reference();
        let t = TruncationConfig::new(10).unwrap();
        for m in 0..6 {
            for parity in ParitySector::BOTH {
                assert_eq!(bare_rank(&p, JcLabel { m, parity }, t), m);
            }
        }
    }
}

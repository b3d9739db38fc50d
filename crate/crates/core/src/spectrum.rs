//! Closed and phenomenological open eigenfrequencies of the Rabi parity blocks.
//!
//! Within a parity block the eigenproblem `H_p c = ω c` is the three-term
//! recursion
//!
//! ```text
//! α_m c_m + β_m c_{m+1} + γ_m c_{m−1} = 0
//! α_m = ω − m ν_c + (p/2)(−1)^m ν_q + i m(m−1) κ_c2
//! β_m = −√(m+1) g,   γ_m = −√m g
//! ```
//!
//! whose truncated determinant `G_{p,m} = det(ω − H_p)[0..=m]` obeys
//! `G_m = α_m G_{m−1} − β_{m−1} γ_m G_{m−2}`. Closed roots are found by a
//! Sturm-count scan of that sequence; open eigenvalues come from a dense
//! non-Hermitian eigensolve and are verified against the recursion.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::linalg::{self, Eigensystem};
use crate::model::{
    build_closed_parity_hamiltonian, build_phenomenological_hamiltonian, ModelParams, ParitySector,
    TruncationConfig,
};
use crate::{Error, Result, C64};

/// Bisection stopping width, in units of ν_c.
pub const ROOT_TOL: f64 = 1e-12;
/// Tolerance for cutoff-convergence and oracle comparisons, in units of ν_c.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Cutoff increment used by the convergence gate.
pub const CUTOFF_PROBE: usize = 10;
/// Relative gap between the two best overlaps below which a branch
/// assignment is flagged as ambiguous.
pub const AMBIGUITY_RATIO: f64 = 0.05;

const RESCALE_THRESHOLD: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCoefficients {
    pub alpha: C64,
    pub beta: f64,
    pub gamma: f64,
}

impl RecursionCoefficients {
    pub fn at(params: &ModelParams, p: ParitySector, omega: C64, m: usize) -> Self {
        let mf = m as f64;
        let alpha = omega - mf * params.nu_c()
            + 0.5 * p.sign() * ParitySector::of_power(m).sign() * params.nu_q()
            + C64::new(0.0, mf * (mf - 1.0).max(0.0) * params.kappa_c2());
        Self {
            alpha,
            beta: -(mf + 1.0).sqrt() * params.g(),
            gamma: -mf.sqrt() * params.g(),
        }
    }
}

/// `G_{p,0..=m_max}` stored as mantissa × e^{ln_scale}.
#[derive(Debug, Clone)]
pub struct DeterminantSequence {
    mantissa: Vec<C64>,
    ln_scale: Vec<f64>,
}

impl DeterminantSequence {
    pub fn len(&self) -> usize {
        self.mantissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissa.is_empty()
    }

    /// `G_{p,m}`; may overflow to infinity for very large cutoffs.
    pub fn value(&self, m: usize) -> C64 {
        self.mantissa[m] * self.ln_scale[m].exp()
    }

    pub fn mantissa(&self, m: usize) -> C64 {
        self.mantissa[m]
    }

    pub fn ln_scale(&self, m: usize) -> f64 {
        self.ln_scale[m]
    }

    /// `ln |G_{p,m}|`, finite even when the value itself is not.
    pub fn ln_abs(&self, m: usize) -> f64 {
        self.mantissa[m].norm().ln() + self.ln_scale[m]
    }

    pub fn last(&self) -> C64 {
        self.value(self.len() - 1)
    }
}

/// Runs the determinant recursion up to `m_max`, rescaling the running pair
/// whenever it exceeds [`RESCALE_THRESHOLD`].
pub fn determinant_sequence(
    params: &ModelParams,
    p: ParitySector,
    omega: C64,
    m_max: usize,
) -> Result<DeterminantSequence> {
    if m_max < 1 {
        return Err(Error::InvalidParameter("m_max must be >= 1".into()));
    }
    let mut mantissa = Vec::with_capacity(m_max + 1);
    let mut ln_scale = Vec::with_capacity(m_max + 1);
    let mut scale = 0.0;
    // G_{-1} = 1 lets m = 0 and m = 1 use the general step.
    let mut prev2 = C64::new(0.0, 0.0);
    let mut prev = C64::new(1.0, 0.0);
    let mut last_coeff: Option<RecursionCoefficients> = None;
    for m in 0..=m_max {
        let c = RecursionCoefficients::at(params, p, omega, m);
        let coupling = last_coeff.map_or(0.0, |lc| lc.beta * c.gamma);
        let next = c.alpha * prev - coupling * prev2;
        prev2 = prev;
        prev = next;
        let big = prev.norm().max(prev2.norm());
        if big > RESCALE_THRESHOLD {
            prev /= big;
            prev2 /= big;
            scale += big.ln();
        }
        mantissa.push(prev);
        ln_scale.push(scale);
        last_coeff = Some(c);
    }
    Ok(DeterminantSequence { mantissa, ln_scale })
}

/// `G/G'` at `omega` for the full truncated block: the Newton step, i.e. an
/// estimate of the distance to the nearest root.
pub fn newton_step(params: &ModelParams, p: ParitySector, omega: C64, m_max: usize) -> C64 {
    let (mut g2, mut g1) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let (mut d2, mut d1) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let mut last_coeff: Option<RecursionCoefficients> = None;
    for m in 0..=m_max {
        let c = RecursionCoefficients::at(params, p, omega, m);
        let coupling = last_coeff.map_or(0.0, |lc| lc.beta * c.gamma);
        let g = c.alpha * g1 - coupling * g2;
        // dα/dω = 1
        let d = g1 + c.alpha * d1 - coupling * d2;
        g2 = g1;
        g1 = g;
        d2 = d1;
        d1 = d;
        let big = g1.norm().max(g2.norm()).max(d1.norm()).max(d2.norm());
        if big > RESCALE_THRESHOLD {
            g1 /= big;
            g2 /= big;
            d1 /= big;
            d2 /= big;
        }
        last_coeff = Some(c);
    }
    g1 / d1
}

/// Number of eigenvalues of the closed block strictly below `omega`, from the
/// signs of the pivots `G_m / G_{m−1}` (Sturm count).
pub fn count_below(params: &ModelParams, p: ParitySector, omega: f64, n_max: usize) -> usize {
    let tiny = f64::EPSILON * (1.0 + omega.abs() + n_max as f64 * params.nu_c());
    let mut above = 0;
    let mut pivot = 1.0;
    let mut last_beta = 0.0;
    for m in 0..=n_max {
        let c = RecursionCoefficients::at(params, p, C64::new(omega, 0.0), m);
        let mut d = c.alpha.re
            - if m == 0 {
                0.0
            } else {
                last_beta * c.gamma / pivot
            };
        if d == 0.0 {
            d = tiny;
        }
        if d < 0.0 {
            above += 1;
        }
        pivot = d;
        last_beta = c.beta;
    }
    n_max + 1 - above
}

/// Branch label `|n_g, p⟩`: rank within the parity block, anchored at `g = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub n_g: usize,
    pub parity: ParitySector,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "|{}_g,{}>", self.n_g, self.parity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub label: Label,
    /// `ω = ν − iκ`.
    pub omega: C64,
    /// `|G/G'|` from the determinant recursion at the returned ω.
    pub residual: f64,
    /// False when the residual check failed; such entries are still reported.
    pub verified: bool,
}

impl SpectrumEntry {
    pub fn frequency(&self) -> f64 {
        self.omega.re
    }

    pub fn decay_rate(&self) -> f64 {
        -self.omega.im
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub g: f64,
    pub n_max: usize,
    pub entries: Vec<SpectrumEntry>,
    /// Roots found but dropped by the cutoff-convergence gate.
    pub unconverged: Vec<SpectrumEntry>,
    pub warnings: Vec<String>,
}

impl ComplexSpectrum {
    pub fn omegas(&self) -> Vec<C64> {
        self.entries.iter().map(|e| e.omega).collect()
    }

    pub fn get(&self, label: Label) -> Option<&SpectrumEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

fn bisect_kth(
    params: &ModelParams,
    p: ParitySector,
    n_max: usize,
    k: usize,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    // Invariant: count_below(lo) <= k < count_below(hi).
    let tol = ROOT_TOL * params.nu_c();
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if count_below(params, p, mid, n_max) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All roots of `G_{p,n_max}` in `[lo, hi]`, with their absolute rank in the block.
fn scan_roots(
    params: &ModelParams,
    p: ParitySector,
    n_max: usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<(usize, f64)>> {
    let first = count_below(params, p, lo, n_max);
    let last = count_below(params, p, hi, n_max);
    let n_roots = last - first;
    let cells = 64.max(8 * n_roots);
    let grid: Vec<f64> = (0..=cells)
        .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
        .collect();
    let counts: Vec<usize> = grid
        .iter()
        .map(|&w| count_below(params, p, w, n_max))
        .collect();
    let mut roots = Vec::with_capacity(n_roots);
    for i in 0..cells {
        let (a, b) = (grid[i], grid[i + 1]);
        let inside = counts[i + 1] - counts[i];
        if inside == 0 {
            continue;
        }
        if inside == 1 {
            roots.push((counts[i], bisect_kth(params, p, n_max, counts[i], a, b)));
            continue;
        }
        // Several sign changes in one cell: refine once.
        let sub = 16 * inside;
        let sub_grid: Vec<f64> = (0..=sub)
            .map(|j| a + (b - a) * j as f64 / sub as f64)
            .collect();
        let sub_counts: Vec<usize> = sub_grid
            .iter()
            .map(|&w| count_below(params, p, w, n_max))
            .collect();
        for j in 0..sub {
            let here = sub_counts[j + 1] - sub_counts[j];
            if here == 0 {
                continue;
            }
            let width = sub_grid[j + 1] - sub_grid[j];
            if here > 1 {
                // Only exact (or sub-tolerance) degeneracies may share a cell
                // after refinement.
                let lo_root = bisect_kth(
                    params,
                    p,
                    n_max,
                    sub_counts[j],
                    sub_grid[j],
                    sub_grid[j + 1],
                );
                let hi_root = bisect_kth(
                    params,
                    p,
                    n_max,
                    sub_counts[j + 1] - 1,
                    sub_grid[j],
                    sub_grid[j + 1],
                );
                if hi_root - lo_root > 10.0 * ROOT_TOL * params.nu_c() && width > 1e-9 {
                    return Err(Error::RootScan(format!(
                        "{here} roots in [{:.6}, {:.6}] after refinement; use a narrower window",
                        sub_grid[j],
                        sub_grid[j + 1]
                    )));
                }
            }
            for k in sub_counts[j]..sub_counts[j + 1] {
                roots.push((
                    k,
                    bisect_kth(params, p, n_max, k, sub_grid[j], sub_grid[j + 1]),
                ));
            }
        }
    }
    Ok(roots)
}

/// Real roots of the closed determinant in `window`, reported only if they
/// move by less than `tol` when the cutoff is raised by [`CUTOFF_PROBE`].
pub fn find_closed_eigenfrequencies_with_tol(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
    window: (f64, f64),
    tol: f64,
) -> Result<ComplexSpectrum> {
    if !params.is_closed() {
        return Err(Error::InvalidParameter(
            "closed root finding requires kappa_c2 = 0; use find_open_eigenfrequencies".into(),
        ));
    }
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "invalid window [{lo}, {hi}]"
        )));
    }
    let n_max = trunc.n_max();
    let roots = scan_roots(params, p, n_max, lo, hi)?;
    let probe = scan_roots(params, p, n_max + CUTOFF_PROBE, lo, hi)?;

    let mut spectrum = ComplexSpectrum {
        g: params.g(),
        n_max,
        ..Default::default()
    };
    let edge = 0.1 * (hi - lo);
    for (k, w) in roots {
        let omega = C64::new(w, 0.0);
        let entry = SpectrumEntry {
            label: Label { n_g: k, parity: p },
            omega,
            residual: newton_step(params, p, omega, n_max).norm(),
            verified: true,
        };
        if w - lo < edge || hi - w < edge {
            spectrum.warnings.push(format!(
                "root {w:.9} of block {p} lies within 10% of the window edge"
            ));
        }
        let converged = probe
            .iter()
            .find(|(kk, _)| *kk == k)
            .is_some_and(|(_, wp)| (wp - w).abs() < tol);
        if converged {
            spectrum.entries.push(entry);
        } else {
            spectrum.unconverged.push(entry);
        }
    }
    for w in &spectrum.warnings {
        log::warn!("{w}");
    }
    Ok(spectrum)
}

pub fn find_closed_eigenfrequencies(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
    window: (f64, f64),
) -> Result<ComplexSpectrum> {
    find_closed_eigenfrequencies_with_tol(params, p, trunc, window, CONVERGENCE_TOL)
}

/// The lowest `count` roots of the closed block, with the scan window placed
/// from the Sturm count so that no reported root sits near its edge.
pub fn lowest_closed_eigenfrequencies(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
    count: usize,
) -> Result<ComplexSpectrum> {
    let n_max = trunc.n_max();
    if count == 0 || count > n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "cannot take {count} roots from a block of dimension {}",
            n_max + 1
        )));
    }
    if !params.is_closed() {
        return Err(Error::InvalidParameter(
            "closed root finding requires kappa_c2 = 0".into(),
        ));
    }
    let block = linalg::real_part(&build_closed_parity_hamiltonian(params, p, trunc).matrix);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in 0..=n_max {
        let radius: f64 = (0..=n_max)
            .filter(|&j| j != m)
            .map(|j| block[(m, j)].abs())
            .sum();
        lo = lo.min(block[(m, m)] - radius);
        hi = hi.max(block[(m, m)] + radius);
    }
    let first = bisect_kth(params, p, n_max, 0, lo - 1.0, hi + 1.0);
    let last = bisect_kth(params, p, n_max, count - 1, lo - 1.0, hi + 1.0);
    let pad = 0.25 * (last - first + params.nu_c());
    let mut spectrum = find_closed_eigenfrequencies(params, p, trunc, (first - pad, last + pad))?;
    spectrum.entries.retain(|e| e.label.n_g < count);
    spectrum.unconverged.retain(|e| e.label.n_g < count);
    Ok(spectrum)
}

fn residual_ok(residual: f64, omega: C64) -> bool {
    residual < CONVERGENCE_TOL * (1.0 + omega.norm())
}

fn sorted_eigenvalues(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
) -> Result<Vec<C64>> {
    let block = build_phenomenological_hamiltonian(params, p, trunc);
    let mut values = if params.is_closed() {
        linalg::symmetric_eigen(&linalg::real_part(&block.matrix))
            .0
            .into_iter()
            .map(|x| C64::new(x, 0.0))
            .collect()
    } else {
        linalg::eigenvalues(&block.matrix)?
    };
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(values)
}

/// Every eigenvalue of the truncated phenomenological block, ranked by real
/// part and checked against the determinant recursion.
pub fn find_open_eigenfrequencies(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
) -> Result<ComplexSpectrum> {
    let values = sorted_eigenvalues(params, p, trunc)?;
    let mut spectrum = ComplexSpectrum {
        g: params.g(),
        n_max: trunc.n_max(),
        ..Default::default()
    };
    for (k, omega) in values.into_iter().enumerate() {
        let residual = newton_step(params, p, omega, trunc.n_max()).norm();
        let verified = residual_ok(residual, omega);
        if !verified {
            spectrum.warnings.push(format!(
                "eigenvalue {omega:.9} of block {p} fails the determinant residual check ({residual:.2e})"
            ));
        }
        spectrum.entries.push(SpectrumEntry {
            label: Label { n_g: k, parity: p },
            omega,
            residual,
            verified,
        });
    }
    for w in &spectrum.warnings {
        log::warn!("{w}");
    }
    Ok(spectrum)
}

/// The lowest `⌊n_max/3⌋` open eigenvalues that move by less than `tol`
/// when the cutoff is raised by [`CUTOFF_PROBE`].
pub fn trusted_open_eigenfrequencies(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
    tol: f64,
) -> Result<ComplexSpectrum> {
    let mut base = find_open_eigenfrequencies(params, p, trunc)?;
    let probe = sorted_eigenvalues(params, p, trunc.raised(CUTOFF_PROBE))?;
    let keep = trunc.n_max() / 3;
    let all = std::mem::take(&mut base.entries);
    for entry in all {
        let nearest = probe
            .iter()
            .map(|w| (w - entry.omega).norm())
            .fold(f64::INFINITY, f64::min);
        if entry.label.n_g < keep && nearest < tol {
            base.entries.push(entry);
        } else {
            base.unconverged.push(entry);
        }
    }
    Ok(base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `Σ |c_m|² = 1`.
    UnitNorm,
    /// `⟨L_n|R_n⟩ = 1` with left and right vectors of a non-Hermitian block.
    Biorthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeSource {
    /// Forward recursion from `c_0 = 1`, joined to a backward tail.
    Recursion,
    /// `g = 0`: the unit vector at the bare index.
    BareState,
    /// Recursion tail failed the decay diagnostic; dense eigenvector used.
    DenseFallback,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenmodeExpansion {
    pub parity: ParitySector,
    pub omega: C64,
    pub coefficients: Vec<C64>,
    pub normalization: Normalization,
    /// Largest three-term residual over interior `m`.
    pub residual: f64,
    pub source: ModeSource,
}

impl EigenmodeExpansion {
    pub fn as_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.coefficients)
    }
}

fn recursion_residual(params: &ModelParams, p: ParitySector, omega: C64, c: &[C64]) -> f64 {
    let n = c.len();
    (1..n - 1)
        .map(|m| {
            let rc = RecursionCoefficients::at(params, p, omega, m);
            (rc.alpha * c[m] + rc.beta * c[m + 1] + rc.gamma * c[m - 1]).norm()
        })
        .fold(0.0, f64::max)
}

fn normalize(c: &mut [C64]) {
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in c.iter_mut() {
        *z /= norm;
    }
}

/// Amplitudes `c_m` of the eigenmode at `omega`, normalised to unit norm.
///
/// The forward recursion from `c_0 = 1` is accurate while the mode grows or
/// oscillates; beyond the peak it is swamped by the dominant solution, so the
/// tail is taken from the backward recursion started at the truncation
/// boundary (`c_{n_max+1} = 0`) and joined at the peak.
pub fn eigenmode_coefficients(
    params: &ModelParams,
    p: ParitySector,
    omega: C64,
    trunc: TruncationConfig,
) -> Result<EigenmodeExpansion> {
    let dim = trunc.block_dim();
    let n_max = trunc.n_max();
    let coeff: Vec<RecursionCoefficients> = (0..dim)
        .map(|m| RecursionCoefficients::at(params, p, omega, m))
        .collect();

    if params.g() == 0.0 {
        let bare = (0..dim)
            .min_by(|&a, &b| coeff[a].alpha.norm().total_cmp(&coeff[b].alpha.norm()))
            .unwrap_or(0);
        let mut c = vec![C64::new(0.0, 0.0); dim];
        c[bare] = C64::new(1.0, 0.0);
        return Ok(EigenmodeExpansion {
            parity: p,
            omega,
            coefficients: c,
            normalization: Normalization::UnitNorm,
            residual: 0.0,
            source: ModeSource::BareState,
        });
    }

    let mut forward = vec![C64::new(0.0, 0.0); dim];
    forward[0] = C64::new(1.0, 0.0);
    forward[1] = -coeff[0].alpha * forward[0] / coeff[0].beta;
    for m in 1..n_max {
        forward[m + 1] =
            -(coeff[m].alpha * forward[m] + coeff[m].gamma * forward[m - 1]) / coeff[m].beta;
    }

    let mut backward = vec![C64::new(0.0, 0.0); dim];
    backward[n_max] = C64::new(1.0, 0.0);
    backward[n_max - 1] = -coeff[n_max].alpha * backward[n_max] / coeff[n_max].gamma;
    for m in (1..n_max).rev() {
        backward[m - 1] =
            -(coeff[m].alpha * backward[m] + coeff[m].beta * backward[m + 1]) / coeff[m].gamma;
        let big = backward[m - 1].norm();
        if big > RESCALE_THRESHOLD {
            for z in backward.iter_mut() {
                *z /= big;
            }
        }
    }

    let join = (0..dim)
        .max_by(|&a, &b| backward[a].norm().total_cmp(&backward[b].norm()))
        .unwrap_or(0);
    let mut c = forward.clone();
    let ratio = forward[join] / backward[join];
    if ratio.is_finite() && ratio.norm() > 0.0 {
        for m in join..dim {
            c[m] = backward[m] * ratio;
        }
    } else {
        c = backward;
    }
    normalize(&mut c);
    let residual = recursion_residual(params, p, omega, &c);

    // Tail-decay diagnostic.
    let tail = (dim * 3 / 4).max(1)..dim;
    let tail_grows = tail
        .clone()
        .skip(1)
        .any(|m| c[m].norm() > 2.0 * c[m - 1].norm() && c[m].norm() > 1e-6);
    if tail_grows || !c.iter().all(|z| z.is_finite()) || residual > CONVERGENCE_TOL {
        log::warn!("eigenmode recursion at ω = {omega:.6} failed the tail diagnostic; using dense eigenvector");
        let block = build_phenomenological_hamiltonian(params, p, trunc);
        let es = linalg::eigensystem(&block.matrix)?;
        let k = (0..dim)
            .min_by(|&a, &b| {
                (es.values[a] - omega)
                    .norm()
                    .total_cmp(&(es.values[b] - omega).norm())
            })
            .unwrap_or(0);
        let mut v: Vec<C64> = es.right.column(k).iter().copied().collect();
        // Fix the global phase so that c_0 is real and non-negative.
        let phase = if v[0].norm() > 0.0 {
            v[0].conj() / v[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for z in v.iter_mut() {
            *z *= phase;
        }
        let residual = recursion_residual(params, p, es.values[k], &v);
        return Ok(EigenmodeExpansion {
            parity: p,
            omega,
            coefficients: v,
            normalization: Normalization::UnitNorm,
            residual,
            source: ModeSource::DenseFallback,
        });
    }

    Ok(EigenmodeExpansion {
        parity: p,
        omega,
        coefficients: c,
        normalization: Normalization::UnitNorm,
        residual,
        source: ModeSource::Recursion,
    })
}

/// One labelled branch over the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub label: Label,
    pub omega: Vec<C64>,
}

impl Branch {
    pub fn decay_rates(&self) -> Vec<f64> {
        self.omega.iter().map(|w| -w.im).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w.re).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ambiguity {
    pub g_index: usize,
    pub g: f64,
    pub label: Label,
    /// `(best − second) / best` of the overlap magnitudes.
    pub gap: f64,
}

/// Result of [`track_levels_over_sweep`].
#[derive(Debug, Clone)]
pub struct LevelTracking {
    pub parity: ParitySector,
    pub g_grid: Vec<f64>,
    pub branches: Vec<Branch>,
    pub ambiguities: Vec<Ambiguity>,
    /// Eigen-decomposition of the block at each grid point.
    pub eigensystems: Vec<Eigensystem>,
    /// `assignment[k][branch]` = column of `eigensystems[k]` carrying that branch.
    pub assignment: Vec<Vec<usize>>,
}

impl LevelTracking {
    pub fn branch(&self, n_g: usize) -> Option<&Branch> {
        self.branches.iter().find(|b| b.label.n_g == n_g)
    }
}

fn block_eigensystem(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
) -> Result<Eigensystem> {
    let block = build_phenomenological_hamiltonian(params, p, trunc);
    if params.is_closed() {
        let (values, vectors) = linalg::symmetric_eigen(&linalg::real_part(&block.matrix));
        let right = vectors.map(|x| C64::new(x, 0.0));
        let n = values.len();
        return Ok(Eigensystem {
            values: values.into_iter().map(|x| C64::new(x, 0.0)).collect(),
            left: right.clone(),
            right,
            condition: vec![1.0; n],
        });
    }
    linalg::eigensystem(&block.matrix)
}

/// Follows every eigenvalue of one parity block along an ascending `g_grid`
/// starting at `g = 0`, continuing each branch to the eigenvector of maximal
/// overlap at the next grid point.
pub fn track_levels_over_sweep(
    params_template: &ModelParams,
    p: ParitySector,
    g_grid: &[f64],
    trunc: TruncationConfig,
) -> Result<LevelTracking> {
    if g_grid.first() != Some(&0.0) {
        return Err(Error::InvalidParameter("g_grid must start at g = 0".into()));
    }
    if g_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "g_grid must be strictly ascending".into(),
        ));
    }
    let eigensystems: Vec<Eigensystem> = g_grid
        .par_iter()
        .map(|&g| block_eigensystem(&params_template.with_g(g)?, p, trunc))
        .collect::<Result<_>>()?;

    let dim = trunc.block_dim();
    // At g = 0 the eigensystem is sorted by real part: branch b ↔ column b.
    let mut assignment: Vec<Vec<usize>> = vec![(0..dim).collect()];
    let mut ambiguities = Vec::new();
    for k in 1..g_grid.len() {
        let prev = &eigensystems[k - 1];
        let next = &eigensystems[k];
        let prev_cols = &assignment[k - 1];
        let overlap = DMatrix::from_fn(dim, dim, |b, j| {
            prev.right
                .column(prev_cols[b])
                .dotc(&next.right.column(j))
                .norm()
        });
        let cost: Vec<f64> = (0..dim)
            .flat_map(|b| (0..dim).map(move |j| (b, j)))
            .map(|(b, j)| 1.0 - overlap[(b, j)])
            .collect();
        let cols = min_cost_assignment(&cost, dim);
        for b in 0..dim {
            let mut row: Vec<f64> = overlap.row(b).iter().copied().collect();
            row.sort_by(|x, y| y.total_cmp(x));
            let gap = if row[0] > 0.0 {
                (row[0] - row[1]) / row[0]
            } else {
                0.0
            };
            if gap < AMBIGUITY_RATIO {
                let label = Label { n_g: b, parity: p };
                log::debug!(
                    "ambiguous continuation of {label} at g = {:.6}; refine the g grid",
                    g_grid[k]
                );
                ambiguities.push(Ambiguity {
                    g_index: k,
                    g: g_grid[k],
                    label,
                    gap,
                });
            }
        }
        assignment.push(cols);
    }

    let branches = (0..dim)
        .map(|b| Branch {
            label: Label { n_g: b, parity: p },
            omega: (0..g_grid.len())
                .map(|k| eigensystems[k].values[assignment[k][b]])
                .collect(),
        })
        .collect();
    Ok(LevelTracking {
        parity: p,
        g_grid: g_grid.to_vec(),
        branches,
        ambiguities,
        eigensystems,
        assignment,
    })
}

/// Largest ratio between a step of `values` and the median step size of its
/// neighbourhood; large values indicate a branch jump.
pub fn max_jump_ratio(values: &[f64]) -> f64 {
    let steps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut worst: f64 = 0.0;
    for i in 0..steps.len() {
        let lo = i.saturating_sub(3);
        let hi = (i + 4).min(steps.len());
        let mut local: Vec<f64> = (lo..hi).filter(|&j| j != i).map(|j| steps[j]).collect();
        if local.is_empty() {
            continue;
        }
        local.sort_by(f64::total_cmp);
        let median = local[local.len() / 2];
        let floor = 1e-9 * (1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        worst = worst.max(steps[i] / median.max(floor));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nu_q: f64, g: f64, kappa: f64) -> ModelParams {
        ModelParams::new(1.0, nu_q, g, kappa).unwrap()
    }

    #[test]
    fn coefficient_relations() {
        let pr = params(0.8, 0.37, 0.0);
        for m in 1..20 {
            let a = RecursionCoefficients::at(&pr, ParitySector::Even, C64::new(0.3, 0.0), m - 1);
            let b = RecursionCoefficients::at(&pr, ParitySector::Even, C64::new(0.3, 0.0), m);
            assert_eq!(a.beta, b.gamma);
            assert_eq!(b.alpha.im, 0.0);
        }
    }

    #[test]
    fn first_two_determinants() {
        let pr = params(0.8, 0.3, 0.02);
        let w = C64::new(0.7, -0.1);
        let seq = determinant_sequence(&pr, ParitySector::Odd, w, 1).unwrap();
        let c0 = RecursionCoefficients::at(&pr, ParitySector::Odd, w, 0);
        let c1 = RecursionCoefficients::at(&pr, ParitySector::Odd, w, 1);
        assert!((seq.value(0) - c0.alpha).norm() < 1e-15);
        assert!((seq.value(1) - (c0.alpha * c1.alpha - c0.beta * c1.gamma)).norm() < 1e-15);
        assert!(determinant_sequence(&pr, ParitySector::Odd, w, 0).is_err());
    }

    #[test]
    fn zero_coupling_is_a_product() {
        let pr = params(0.8, 0.0, 0.0);
        let w = C64::new(0.123, 0.0);
        let seq = determinant_sequence(&pr, ParitySector::Even, w, 8).unwrap();
        let mut prod = C64::new(1.0, 0.0);
        for m in 0..=8 {
            prod *= RecursionCoefficients::at(&pr, ParitySector::Even, w, m).alpha;
            assert!((seq.value(m) - prod).norm() <= 1e-13 * prod.norm());
        }
    }

    #[test]
    fn rescaling_keeps_log_magnitude() {
        let pr = params(0.8, 0.5, 0.0);
        let w = C64::new(-3.0, 0.0);
        let seq = determinant_sequence(&pr, ParitySector::Even, w, 200).unwrap();
        assert!(seq.ln_scale(200) > 0.0);
        // All pivots are positive below the spectrum; |G| grows monotonically.
        for m in 1..=200 {
            assert!(seq.ln_abs(m) > seq.ln_abs(m - 1));
        }
    }

    #[test]
    fn sturm_count_at_zero_coupling() {
        let pr = params(0.8, 0.0, 0.0);
        // + block diagonal: -0.4, 1.4, 1.6, 3.4, 3.6, ...
        assert_eq!(count_below(&pr, ParitySector::Even, -0.5, 9), 0);
        assert_eq!(count_below(&pr, ParitySector::Even, 0.0, 9), 1);
        assert_eq!(count_below(&pr, ParitySector::Even, 1.5, 9), 2);
        assert_eq!(count_below(&pr, ParitySector::Even, 100.0, 9), 10);
    }

    #[test]
    fn closed_roots_at_zero_coupling() {
        let pr = params(0.8, 0.0, 0.0);
        let s = find_closed_eigenfrequencies(
            &pr,
            ParitySector::Even,
            TruncationConfig::new(20).unwrap(),
            (-1.0, 4.0),
        )
        .unwrap();
        let got: Vec<f64> = s.entries.iter().map(|e| e.omega.re).collect();
        let want = [-0.4, 1.4, 1.6, 3.4, 3.6];
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-11);
        }
        assert_eq!(s.entries[0].label.n_g, 0);
    }

    #[test]
    fn resonant_degeneracy_is_resolved() {
        // ν_q = ν_c makes |1,e⟩ and |2,g⟩ degenerate at g = 0.
        let pr = params(1.0, 0.0, 0.0);
        let s = find_closed_eigenfrequencies(
            &pr,
            ParitySector::Even,
            TruncationConfig::new(12).unwrap(),
            (-1.0, 3.0),
        )
        .unwrap();
        let got: Vec<f64> = s.entries.iter().map(|e| e.omega.re).collect();
        assert_eq!(got.len(), 3);
        assert!((got[1] - 1.5).abs() < 1e-11 && (got[2] - 1.5).abs() < 1e-11);
    }

    #[test]
    fn closed_finder_rejects_open_params() {
        let pr = params(0.8, 0.1, 0.01);
        assert!(find_closed_eigenfrequencies(
            &pr,
            ParitySector::Even,
            TruncationConfig::new(10).unwrap(),
            (-1.0, 1.0)
        )
        .is_err());
        let pr = params(0.8, 0.1, 0.0);
        assert!(find_closed_eigenfrequencies(
            &pr,
            ParitySector::Even,
            TruncationConfig::new(10).unwrap(),
            (1.0, -1.0)
        )
        .is_err());
    }

    #[test]
    fn edge_warning() {
        let pr = params(0.8, 0.0, 0.0);
        let s = find_closed_eigenfrequencies(
            &pr,
            ParitySector::Even,
            TruncationConfig::new(10).unwrap(),
            (-0.45, 1.0),
        )
        .unwrap();
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn unconverged_top_roots_are_withheld() {
        let pr = params(0.8, 1.0, 0.0);
        let trunc = TruncationConfig::new(12).unwrap();
        let s = find_closed_eigenfrequencies(&pr, ParitySector::Even, trunc, (-5.0, 30.0)).unwrap();
        assert!(!s.unconverged.is_empty());
        assert!(s.entries.len() + s.unconverged.len() == 13);
    }

    #[test]
    fn open_zero_coupling_is_diagonal() {
        let k = 1.0 / 40.0;
        let pr = params(0.8, 0.0, k);
        for p in ParitySector::BOTH {
            let s = find_open_eigenfrequencies(&pr, p, TruncationConfig::new(9).unwrap()).unwrap();
            for e in &s.entries {
                assert!(e.verified);
            }
            let mut expected: Vec<C64> = (0..10)
                .map(|m| {
                    let mf = m as f64;
                    C64::new(
                        mf - 0.5 * p.sign() * ParitySector::of_power(m).sign() * 0.8,
                        -k * mf * (mf - 1.0),
                    )
                })
                .collect();
            expected.sort_by(|a, b| a.re.total_cmp(&b.re));
            for (e, w) in s.entries.iter().zip(expected) {
                assert!((e.omega - w).norm() <= 4.0 * f64::EPSILON * w.norm());
            }
        }
    }

    #[test]
    fn open_decay_rates_are_nonnegative() {
        let pr = params(0.8, 0.7, 1.0 / 40.0);
        let s =
            find_open_eigenfrequencies(&pr, ParitySector::Odd, TruncationConfig::new(30).unwrap())
                .unwrap();
        assert!(s
            .entries
            .iter()
            .all(|e| e.decay_rate() > -1e-10 && e.verified));
    }

    #[test]
    fn bare_mode_at_zero_coupling() {
        let pr = params(0.8, 0.0, 0.0);
        let omega = C64::new(1.0 - 0.4, 0.0); // |1,−⟩
        let mode = eigenmode_coefficients(
            &pr,
            ParitySector::Odd,
            omega,
            TruncationConfig::new(6).unwrap(),
        )
        .unwrap();
        assert_eq!(mode.source, ModeSource::BareState);
        assert_eq!(mode.coefficients[1], C64::new(1.0, 0.0));
        assert!(mode
            .coefficients
            .iter()
            .enumerate()
            .all(|(m, z)| m == 1 || z.norm() == 0.0));
    }

    #[test]
    fn tracking_requires_zero_anchor() {
        let pr = params(0.8, 0.0, 0.0);
        let trunc = TruncationConfig::new(6).unwrap();
        assert!(track_levels_over_sweep(&pr, ParitySector::Even, &[0.1, 0.2], trunc).is_err());
        assert!(track_levels_over_sweep(&pr, ParitySector::Even, &[0.0, 0.2, 0.1], trunc).is_err());
        let t = track_levels_over_sweep(&pr, ParitySector::Even, &[0.0], trunc).unwrap();
        let zero: Vec<f64> = t.branches.iter().map(|b| b.omega[0].re).collect();
        assert!(zero.windows(2).all(|w| w[0] <= w[1]));
        assert!((zero[0] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn jump_ratio_detects_discontinuity() {
        let smooth: Vec<f64> = (0..50).map(|i| (i as f64 * 0.1).sin()).collect();
        assert!(max_jump_ratio(&smooth) < 3.0);
        let mut jumpy = smooth.clone();
        for v in jumpy.iter_mut().skip(25) {
            *v += 5.0;
        }
        assert!(max_jump_ratio(&jumpy) > 10.0);
    }
}

//! Vectorised master equation: `dΨ/dt = −i H_u Ψ` on system ⊗ auxiliary.
//!
//! `Ψ` holds `ρ[s][a]` at index `s·D + a`. With this ordering
//!
//! ```text
//! H_u = H_ef ⊗ 1 − 1 ⊗ H_ef* + i Γ (c ⊗ c*)
//! ```
//!
//! reproduces `ρ̇ = −i(H_ef ρ − ρ H_ef†) + Γ c ρ c†`. For the Rabi model
//! `c = b²` and `Γ = 2κ_c2`.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::linalg::{self, kron, Eigensystem};
use crate::model::{full, ModelParams, ParitySector, TruncationConfig};
use crate::ode::{self, OdeOptions};
use crate::{Error, Result, C64};

/// Tolerance for eigenvalue-level comparisons of the doubled-space spectrum.
pub const EIGEN_TOL: f64 = 1e-9;

fn cz(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedState {
    dim: usize,
    data: DVector<C64>,
}

impl VectorizedState {
    pub fn from_vector(dim: usize, data: DVector<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// System/auxiliary dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &DVector<C64> {
        &self.data
    }

    pub fn at(&self, s: usize, a: usize) -> C64 {
        self.data[s * self.dim + a]
    }

    /// `Σ_n Ψ[n, n]`.
    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|n| self.at(n, n)).sum()
    }
}

pub fn vectorize(rho: &DMatrix<C64>) -> Result<VectorizedState> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            actual: rho.ncols(),
        });
    }
    let d = rho.nrows();
    Ok(VectorizedState {
        dim: d,
        data: DVector::from_fn(d * d, |k, _| rho[(k / d, k % d)]),
    })
}

pub fn unvectorize(state: &VectorizedState) -> DMatrix<C64> {
    let d = state.dim;
    DMatrix::from_fn(d, d, |s, a| state.data[s * d + a])
}

/// `H_u` on the doubled space. `block_dim` is set when the single-copy
/// space is the Rabi parity-block sum, enabling sector queries.
#[derive(Debug, Clone)]
pub struct FullEffectiveOperator {
    matrix: DMatrix<C64>,
    dim: usize,
    block_dim: Option<usize>,
}

impl FullEffectiveOperator {
    /// `H_ef ⊗ 1 − 1 ⊗ H_ef* + i Γ (c ⊗ c*)` for each `(c, Γ)` in `collapse`.
    pub fn from_parts(h_ef: &DMatrix<C64>, collapse: &[(&DMatrix<C64>, f64)]) -> Result<Self> {
        let d = h_ef.nrows();
        if !h_ef.is_square() {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: h_ef.ncols(),
            });
        }
        let id = DMatrix::<C64>::identity(d, d);
        let mut m = kron(h_ef, &id) - kron(&id, &h_ef.map(|z| z.conj()));
        for (c, rate) in collapse {
            if c.nrows() != d || c.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: c.nrows(),
                });
            }
            m += kron(c, &c.map(|z| z.conj())) * cz(0.0, *rate);
        }
        Ok(Self {
            matrix: m,
            dim: d,
            block_dim: None,
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(p_s, p_a)` of doubled-space basis element `k`.
    pub fn sector_of(&self, k: usize) -> Option<(ParitySector, ParitySector)> {
        let d = self.block_dim?;
        let sector = |i: usize| {
            if i < d {
                ParitySector::Even
            } else {
                ParitySector::Odd
            }
        };
        Some((sector(k / self.dim), sector(k % self.dim)))
    }

    /// Doubled-space indices of the `(p_s, p_a)` sector, row-major in
    /// `(s, a)` within it.
    pub fn sector_indices(&self, ps: ParitySector, pa: ParitySector) -> Result<Vec<usize>> {
        let d = self.block_dim.ok_or_else(|| {
            Error::InvalidParameter("operator carries no parity structure".into())
        })?;
        let (os, oa) = (ps.block_index() * d, pa.block_index() * d);
        Ok((0..d * d)
            .map(|k| (os + k / d) * self.dim + oa + k % d)
            .collect())
    }

    pub fn sector_block(&self, ps: ParitySector, pa: ParitySector) -> Result<DMatrix<C64>> {
        let idx = self.sector_indices(ps, pa)?;
        let n = idx.len();
        Ok(DMatrix::from_fn(n, n, |r, c| self.matrix[(idx[r], idx[c])]))
    }

    /// Largest entry of `H_u` coupling different parity sectors.
    pub fn cross_sector_norm(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                if self.sector_of(r) != self.sector_of(c) {
                    worst = worst.max(self.matrix[(r, c)].norm());
                }
            }
        }
        worst
    }

    /// `max |S H_u S + H_u*|`, with `S` swapping system and auxiliary.
    pub fn swap_symmetry_error(&self) -> f64 {
        let d = self.dim;
        let swap = |k: usize| (k % d) * d + k / d;
        let n = d * d;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                worst = worst
                    .max((self.matrix[(swap(r), swap(c))] + self.matrix[(r, c)].conj()).norm());
            }
        }
        worst
    }

    /// `−i H_u Ψ`.
    pub fn generate(&self, state: &VectorizedState) -> VectorizedState {
        VectorizedState {
            dim: self.dim,
            data: (&self.matrix * &state.data) * cz(0.0, -1.0),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&self.matrix)
    }

    /// Integrates `dΨ/dt = −i H_u Ψ`, returning Ψ at each time in `t_grid`.
    pub fn propagate(
        &self,
        psi0: &VectorizedState,
        t_grid: &[f64],
        opts: OdeOptions,
    ) -> Result<Vec<VectorizedState>> {
        let m = &self.matrix;
        let mut out = Vec::with_capacity(t_grid.len());
        ode::integrate(
            |_, y, dy| {
                let v = DVector::from_column_slice(y);
                let r = (m * v) * cz(0.0, -1.0);
                dy.copy_from_slice(r.as_slice());
            },
            0.0,
            psi0.data.as_slice(),
            t_grid,
            opts,
            |_, _, y| {
                out.push(VectorizedState {
                    dim: self.dim,
                    data: DVector::from_column_slice(y),
                });
                Ok(())
            },
        )?;
        Ok(out)
    }
}

/// Rabi `H_u` with (`with_collapse`) or without the `2iκ_c2 b² ⊗ b²` term.
pub fn build_rabi_operator(
    params: &ModelParams,
    trunc: TruncationConfig,
    with_collapse: bool,
) -> FullEffectiveOperator {
    let h = full::hamiltonian(params, trunc, true);
    let b = full::lowering(trunc);
    let b2 = &b * &b;
    let collapse = [(&b2, 2.0 * params.kappa_c2())];
    let parts: &[(&DMatrix<C64>, f64)] = if with_collapse && params.kappa_c2() != 0.0 {
        &collapse
    } else {
        &[]
    };
    let mut op = FullEffectiveOperator::from_parts(&h, parts).expect("square by construction");
    op.block_dim = Some(trunc.block_dim());
    op
}

pub fn build_full_effective_hamiltonian(
    params: &ModelParams,
    trunc: TruncationConfig,
) -> FullEffectiveOperator {
    build_rabi_operator(params, trunc, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorSpectrum {
    pub p_s: ParitySector,
    pub p_a: ParitySector,
    /// Sorted by real part, then imaginary part.
    pub omegas: Vec<C64>,
}

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

/// Spectra of the four `(p_s, p_a)` sectors, in the order `++, +−, −+, −−`.
pub fn spectrum_by_parity(op: &FullEffectiveOperator) -> Result<Vec<SectorSpectrum>> {
    let pairs: Vec<(ParitySector, ParitySector)> = ParitySector::BOTH
        .iter()
        .flat_map(|&ps| ParitySector::BOTH.iter().map(move |&pa| (ps, pa)))
        .collect();
    pairs
        .into_iter()
        .map(|(ps, pa)| {
            Ok(SectorSpectrum {
                p_s: ps,
                p_a: pa,
                omegas: sorted(linalg::eigenvalues(&op.sector_block(ps, pa)?)?),
            })
        })
        .collect()
}

pub fn full_spectrum_by_parity(
    params: &ModelParams,
    trunc: TruncationConfig,
) -> Result<Vec<SectorSpectrum>> {
    spectrum_by_parity(&build_full_effective_hamiltonian(params, trunc))
}

/// Optimal one-to-one matching of `a` onto `b` by `|a_i − b_j|`; returns
/// the matched index into `b` for each `a_i`.
pub fn match_spectra(a: &[C64], b: &[C64]) -> Vec<usize> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let cost: Vec<f64> = (0..n * n).map(|k| (a[k / n] - b[k % n]).norm()).collect();
    min_cost_assignment(&cost, n)
}

/// Largest distance between the multiset `values` and its image under
/// `ω → −ω*`.
pub fn self_conjugation_error(values: &[C64]) -> f64 {
    let mirrored: Vec<C64> = values.iter().map(|w| -w.conj()).collect();
    let assign = match_spectra(values, &mirrored);
    assign
        .iter()
        .enumerate()
        .map(|(i, &j)| (values[i] - mirrored[j]).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorComparison {
    pub p_s: ParitySector,
    pub p_a: ParitySector,
    pub with_collapse: Vec<C64>,
    /// Matched partner of each entry of `with_collapse`.
    pub without_collapse: Vec<C64>,
    pub max_re_diff: f64,
    pub max_im_diff: f64,
}

/// Spectrum of `H_u` with and without the collapse term, sector by sector.
pub fn full_vs_phenomenological(
    params: &ModelParams,
    trunc: TruncationConfig,
) -> Result<Vec<SectorComparison>> {
    let with = spectrum_by_parity(&build_rabi_operator(params, trunc, true))?;
    let without = spectrum_by_parity(&build_rabi_operator(params, trunc, false))?;
    Ok(with
        .into_iter()
        .zip(without)
        .map(|(w, wo)| {
            let assign = match_spectra(&w.omegas, &wo.omegas);
            let partner: Vec<C64> = assign.iter().map(|&j| wo.omegas[j]).collect();
            let max_re_diff = w
                .omegas
                .iter()
                .zip(&partner)
                .map(|(a, b)| (a.re - b.re).abs())
                .fold(0.0, f64::max);
            let max_im_diff = w
                .omegas
                .iter()
                .zip(&partner)
                .map(|(a, b)| (a.im - b.im).abs())
                .fold(0.0, f64::max);
            SectorComparison {
                p_s: w.p_s,
                p_a: w.p_a,
                with_collapse: w.omegas,
                without_collapse: partner,
                max_re_diff,
                max_im_diff,
            }
        })
        .collect())
}

// --- Dissipative two-level system, basis order (e, g). ---

/// `H_ef = (ν_q − iγ_q)|e⟩⟨e|` and `σ⁻ = |g⟩⟨e|`.
fn tls_parts(nu_q: f64, gamma_q: f64) -> (DMatrix<C64>, DMatrix<C64>) {
    let mut h = DMatrix::zeros(2, 2);
    h[(0, 0)] = cz(nu_q, -gamma_q);
    let mut lower = DMatrix::zeros(2, 2);
    lower[(1, 0)] = cz(1.0, 0.0);
    (h, lower)
}

/// 4×4 `H_u` of the TLS with decay rate `2γ_q`, basis `ee, eg, ge, gg`.
pub fn tls_operator(nu_q: f64, gamma_q: f64, with_collapse: bool) -> FullEffectiveOperator {
    let (h, lower) = tls_parts(nu_q, gamma_q);
    let collapse = [(&lower, 2.0 * gamma_q)];
    FullEffectiveOperator::from_parts(&h, if with_collapse { &collapse } else { &[] }).expect("2x2")
}

/// `U(t) = exp(−i H_u t)`.
pub fn tls_propagator(nu_q: f64, gamma_q: f64, t: f64) -> DMatrix<C64> {
    (tls_operator(nu_q, gamma_q, true).matrix * cz(0.0, -t)).exp()
}

/// Closed-form `ρ(t)` of the decaying TLS, basis `(e, g)`.
pub fn tls_oracle(nu_q: f64, gamma_q: f64, rho0: &Matrix2<C64>, t: f64) -> Matrix2<C64> {
    let pop = (-2.0 * gamma_q * t).exp();
    let coh = cz(-gamma_q * t, -nu_q * t).exp();
    let ee = rho0[(0, 0)] * pop;
    let eg = rho0[(0, 1)] * coh;
    let ge = rho0[(1, 0)] * coh.conj();
    let gg = rho0[(0, 0)] * (1.0 - pop) + rho0[(1, 1)];
    Matrix2::new(ee, eg, ge, gg)
}

#[derive(Debug, Clone)]
pub struct TlsCollapseDemo {
    pub without: Eigensystem,
    pub with: Eigensystem,
    /// Right eigenvector of the `ω = 0` mode with collapse.
    pub stationary: DVector<C64>,
    /// Eigenvalue and right eigenvector of the mode whose vector is changed
    /// by the collapse term.
    pub modified_mode: (C64, DVector<C64>),
}

/// Eigen-decomposition of the TLS `H_u` with and without collapse.
pub fn tls_collapse_effect_demo(nu_q: f64, gamma_q: f64) -> Result<TlsCollapseDemo> {
    if gamma_q <= 0.0 {
        return Err(Error::InvalidParameter("gamma_q must be positive".into()));
    }
    let without = linalg::eigensystem(tls_operator(nu_q, gamma_q, false).matrix())?;
    let with = linalg::eigensystem(tls_operator(nu_q, gamma_q, true).matrix())?;
    let stationary_index = (0..4)
        .min_by(|&a, &b| with.values[a].norm().total_cmp(&with.values[b].norm()))
        .unwrap_or(0);
    // Largest deviation from a basis vector marks the modified mode.
    let spread = |k: usize| {
        let v = with.right.column(k);
        1.0 - v.iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    let modified = (0..4)
        .max_by(|&a, &b| spread(a).total_cmp(&spread(b)))
        .unwrap_or(0);
    Ok(TlsCollapseDemo {
        stationary: with.right_vector(stationary_index),
        modified_mode: (with.values[modified], with.right_vector(modified)),
        without,
        with,
    })
}

// --- Quadratic positive control: damped oscillator with single-photon loss. ---

/// `H_ef = (ν − iγ) a†a`, collapse `2γ a ρ a†`, on `levels` Fock states.
pub fn damped_oscillator_operator(nu: f64, gamma: f64, levels: usize) -> FullEffectiveOperator {
    let h = DMatrix::from_fn(levels, levels, |i, j| {
        if i == j {
            cz(nu, -gamma) * i as f64
        } else {
            cz(0.0, 0.0)
        }
    });
    let a = full::block_lowering(levels);
    FullEffectiveOperator::from_parts(&h, &[(&a, 2.0 * gamma)]).expect("square")
}

pub fn damped_oscillator_reduced(nu: f64, gamma: f64, levels: usize) -> Vec<C64> {
    (0..levels).map(|m| cz(nu, -gamma) * m as f64).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionResidual {
    pub max: f64,
    pub mean: f64,
    /// Real shift removed before matching.
    pub offset: f64,
    /// `assignment[i] = (m, n)` paired with full eigenvalue `i`.
    pub assignment: Vec<(usize, usize)>,
}

fn candidates(reduced: &[C64]) -> Vec<C64> {
    let n = reduced.len();
    (0..n * n)
        .map(|k| reduced[k / n] - reduced[k % n].conj())
        .collect()
}

/// Optimal matching of `full` against `{ω_m − ω_n*}` built from `reduced`.
pub fn tensor_decomposition_residual(
    full: &[C64],
    reduced: &[C64],
) -> Result<DecompositionResidual> {
    let n = reduced.len();
    if full.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            actual: full.len(),
        });
    }
    let cand = candidates(reduced);
    let mean = |v: &[C64]| v.iter().map(|z| z.re).sum::<f64>() / v.len().max(1) as f64;
    let offset = mean(full) - mean(&cand);
    let shifted: Vec<C64> = full.iter().map(|z| z - offset).collect();
    let assign = match_spectra(&shifted, &cand);
    let err: Vec<f64> = assign
        .iter()
        .enumerate()
        .map(|(i, &j)| (shifted[i] - cand[j]).norm())
        .collect();
    Ok(DecompositionResidual {
        max: err.iter().copied().fold(0.0, f64::max),
        mean: err.iter().sum::<f64>() / err.len().max(1) as f64,
        offset,
        assignment: assign.iter().map(|&j| (j / n, j % n)).collect(),
    })
}

/// Alternates optimal matching with a least-squares update of the reduced
/// spectrum, returning the best residual found and the refined spectrum.
pub fn refine_decomposition(
    full: &[C64],
    reduced: &[C64],
    iterations: usize,
) -> Result<(DecompositionResidual, Vec<C64>)> {
    let n = reduced.len();
    let mut current = reduced.to_vec();
    let mut best = tensor_decomposition_residual(full, &current)?;
    let mut best_reduced = current.clone();
    for _ in 0..iterations {
        let res = tensor_decomposition_residual(full, &current)?;
        // Re(ω_m − ω_n*) = a_m − a_n, Im = b_m + b_n.
        let rows = full.len();
        let mut ar = DMatrix::<f64>::zeros(rows, n);
        let mut br = DMatrix::<f64>::zeros(rows, n);
        let mut yr = DVector::<f64>::zeros(rows);
        let mut yi = DVector::<f64>::zeros(rows);
        for (i, &(m, k)) in res.assignment.iter().enumerate() {
            ar[(i, m)] += 1.0;
            ar[(i, k)] -= 1.0;
            br[(i, m)] += 1.0;
            br[(i, k)] += 1.0;
            yr[i] = full[i].re - res.offset;
            yi[i] = full[i].im;
        }
        let solve = |a: DMatrix<f64>, y: &DVector<f64>| -> Result<DVector<f64>> {
            a.svd(true, true)
                .solve(y, 1e-12)
                .map_err(|e| Error::NullSpace(e.to_string()))
        };
        let a = solve(ar, &yr)?;
        let b = solve(br, &yi)?;
        let next: Vec<C64> = (0..n).map(|m| cz(a[m], b[m])).collect();
        let res_next = tensor_decomposition_residual(full, &next)?;
        if res_next.max < best.max {
            best = res_next.clone();
            best_reduced = next.clone();
        }
        if next
            .iter()
            .zip(&current)
            .all(|(x, y)| (x - y).norm() < 1e-15)
        {
            break;
        }
        current = next;
    }
    Ok((best, best_reduced))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_half_vectorizes() {
        let rho = DMatrix::<C64>::identity(2, 2) * cz(0.5, 0.0);
        let v = vectorize(&rho).unwrap();
        let want = [0.5, 0.0, 0.0, 0.5];
        for (z, w) in v.data().iter().zip(want) {
            assert_eq!(*z, cz(w, 0.0));
        }
        assert_eq!(v.trace(), cz(1.0, 0.0));
        assert_eq!(unvectorize(&v), rho);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(VectorizedState::from_vector(3, DVector::zeros(8)).is_err());
        assert!(vectorize(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn tls_matrix_layout() {
        let (nu, g) = (0.8, 0.1);
        let m = tls_operator(nu, g, true).matrix().clone();
        let mut want = DMatrix::<C64>::zeros(4, 4);
        want[(0, 0)] = cz(0.0, -2.0 * g);
        want[(1, 1)] = cz(nu, -g);
        want[(2, 2)] = cz(-nu, -g);
        want[(3, 0)] = cz(0.0, 2.0 * g);
        assert!((m - want).norm() < 1e-15);
    }

    #[test]
    fn tls_oracle_identity_at_zero_time() {
        let rho = Matrix2::new(cz(0.3, 0.0), cz(0.1, 0.2), cz(0.1, -0.2), cz(0.7, 0.0));
        assert_eq!(tls_oracle(0.8, 0.1, &rho, 0.0), rho);
    }

    #[test]
    fn rabi_operator_sector_structure() {
        let p = ModelParams::new(1.0, 0.8, 0.3, 0.05).unwrap();
        let op = build_full_effective_hamiltonian(&p, TruncationConfig::new(3).unwrap());
        assert_eq!(op.cross_sector_norm(), 0.0);
        assert!(op.swap_symmetry_error() < 1e-15);
    }

    #[test]
    fn decomposition_of_exact_candidates() {
        let reduced = [cz(0.0, 0.0), cz(1.0, -0.2), cz(2.5, -0.7)];
        let mut full = candidates(&reduced);
        full.reverse();
        let r = tensor_decomposition_residual(&full, &reduced).unwrap();
        assert!(r.max < 1e-15);
        assert!(tensor_decomposition_residual(&full[1..], &reduced).is_err());
    }

    #[test]
    fn self_conjugation_detects_asymmetry() {
        let sym = [cz(1.0, -0.1), cz(-1.0, -0.1), cz(0.0, -0.3)];
        assert!(self_conjugation_error(&sym) < 1e-15);
        let asym = [cz(1.0, -0.1), cz(-0.9, -0.1)];
        assert!(self_conjugation_error(&asym) > 0.05);
    }
}

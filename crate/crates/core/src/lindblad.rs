//! Two-photon-loss master equation in the number–parity basis.
//!
//! `ρ̇ = −i(H_ef ρ − ρ H_ef†) + 2κ_c2 b² ρ b†²` with `H_ef` the
//! phenomenological Hamiltonian. Both terms commute with parity, so a state
//! supported on one sector stays there.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Eigensystem};
use crate::model::{full, BareStateLabel, ModelParams, ParitySector, TruncationConfig};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::spectrum::{Label, Normalization};
use crate::{Error, Result, C64};

pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;
pub const LEAKAGE_TOL: f64 = 1e-12;
/// Runs abort once an invariant is violated by this factor.
pub const ABORT_FACTOR: f64 = 10.0;
/// Smallest singular value accepted as a null vector of the generator.
pub const NULL_TOL: f64 = 1e-10;
/// Weight normalisations `⟨L_n|R_n⟩` below this are flagged.
pub const DEFECTIVE_TOL: f64 = 1e-6;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    trunc: TruncationConfig,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(trunc: TruncationConfig, matrix: DMatrix<C64>) -> Result<Self> {
        let d = trunc.full_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { trunc, matrix })
    }

    /// `|n, q⟩⟨n, q|` for a bare cavity–qubit state.
    pub fn from_bare_state(label: BareStateLabel, trunc: TruncationConfig) -> Result<Self> {
        let s = label.to_number_parity();
        if s.m > trunc.n_max() {
            return Err(Error::InvalidParameter(format!(
                "initial state {label} lies above the cutoff n_max = {}",
                trunc.n_max()
            )));
        }
        let i = trunc.index(s.m, s.parity);
        let mut m = DMatrix::zeros(trunc.full_dim(), trunc.full_dim());
        m[(i, i)] = C64::new(1.0, 0.0);
        Ok(Self { trunc, matrix: m })
    }

    /// `|ψ⟩⟨ψ|` for a normalised full-space vector.
    pub fn from_pure(trunc: TruncationConfig, psi: &DVector<C64>) -> Result<Self> {
        Self::new(trunc, psi * psi.adjoint())
    }

    pub fn trunc(&self) -> TruncationConfig {
        self.trunc
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Population of one parity sector, `Tr ρ_pp`.
    pub fn sector_population(&self, p: ParitySector) -> f64 {
        let d = self.trunc.block_dim();
        let o = p.block_index() * d;
        (0..d).map(|i| self.matrix[(o + i, o + i)].re).sum()
    }

    /// Copy of the `(p_s, p_a)` block.
    pub fn block(&self, ps: ParitySector, pa: ParitySector) -> DMatrix<C64> {
        let d = self.trunc.block_dim();
        self.matrix
            .view((ps.block_index() * d, pa.block_index() * d), (d, d))
            .into_owned()
    }

    /// The unique sector holding population, or `MixedParity`.
    pub fn parity_sector(&self) -> Result<ParitySector> {
        let plus = self.sector_population(ParitySector::Even);
        let minus = self.sector_population(ParitySector::Odd);
        let d = self.trunc.block_dim();
        let off = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[(i, d + j)].norm())
            .fold(0.0, f64::max);
        match (plus.abs() > LEAKAGE_TOL, minus.abs() > LEAKAGE_TOL) {
            (true, false) if off <= LEAKAGE_TOL => Ok(ParitySector::Even),
            (false, true) if off <= LEAKAGE_TOL => Ok(ParitySector::Odd),
            _ => Err(Error::MixedParity { plus, minus }),
        }
    }

    pub fn invariants(&self) -> InvariantSample {
        InvariantSample {
            trace_error: (self.trace() - C64::new(1.0, 0.0)).norm(),
            hermiticity_error: self.hermiticity_error(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    /// Row-major entries, `ρ[s][a]` at `s·D + a`.
    pub fn to_row_major(&self) -> Vec<C64> {
        let d = self.matrix.nrows();
        (0..d * d).map(|k| self.matrix[(k / d, k % d)]).collect()
    }

    pub fn from_row_major(trunc: TruncationConfig, data: &[C64]) -> Result<Self> {
        let d = trunc.full_dim();
        if data.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                actual: data.len(),
            });
        }
        Ok(Self {
            trunc,
            matrix: DMatrix::from_row_slice(d, d, data),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSample {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    /// `⟨b†b⟩`.
    pub photon: f64,
    /// `⟨σ⁺σ⁻⟩ = (1 + ⟨σᶻ⟩)/2`.
    pub qubit_excitation: f64,
    /// `⟨P⟩ = Tr ρ_+ − Tr ρ_−`.
    pub parity: f64,
}

pub fn observables(rho: &DensityMatrix) -> Observables {
    let t = rho.trunc();
    let diag: Vec<f64> = rho.matrix().diagonal().iter().map(|z| z.re).collect();
    let dot = |w: Vec<f64>| w.iter().zip(&diag).map(|(a, b)| a * b).sum::<f64>();
    let sz = dot(full::sigma_z_diagonal(t));
    Observables {
        photon: dot(full::number_diagonal(t)),
        qubit_excitation: 0.5 * (diag.iter().sum::<f64>() + sz),
        parity: dot(full::parity_diagonal(t)),
    }
}

/// `⟨H_s⟩` of the closed Rabi Hamiltonian.
pub fn energy(rho: &DensityMatrix, params: &ModelParams) -> f64 {
    let h = full::hamiltonian(params, rho.trunc(), false);
    (h * rho.matrix()).trace().re
}

/// The linear map `ρ ↦ −i(H_ef ρ − ρ H_ef†) + 2κ_c2 b² ρ b†²`.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    params: ModelParams,
    trunc: TruncationConfig,
    h_ef: DMatrix<C64>,
    h_ef_adj: DMatrix<C64>,
    b2: DMatrix<C64>,
    b2_adj: DMatrix<C64>,
}

pub fn build_lindblad_generator(
    params: &ModelParams,
    trunc: TruncationConfig,
) -> LindbladGenerator {
    let h_ef = full::hamiltonian(params, trunc, true);
    let b = full::lowering(trunc);
    let b2 = &b * &b;
    LindbladGenerator {
        params: *params,
        trunc,
        h_ef_adj: h_ef.adjoint(),
        h_ef,
        b2_adj: b2.adjoint(),
        b2,
    }
}

impl LindbladGenerator {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn trunc(&self) -> TruncationConfig {
        self.trunc
    }

    pub fn effective_hamiltonian(&self) -> &DMatrix<C64> {
        &self.h_ef
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let minus_i = C64::new(0.0, -1.0);
        let mut out = (&self.h_ef * rho - rho * &self.h_ef_adj) * minus_i;
        let k = self.params.kappa_c2();
        if k != 0.0 {
            out += (&self.b2 * rho * &self.b2_adj) * C64::new(2.0 * k, 0.0);
        }
        out
    }

    pub fn apply_density(&self, rho: &DensityMatrix) -> DMatrix<C64> {
        self.apply(rho.matrix())
    }

    /// Superoperator on the `(p_s, p_a)` block, acting on its row-major
    /// entries; assembled column by column from [`Self::apply`].
    pub fn sector_superoperator(&self, ps: ParitySector, pa: ParitySector) -> DMatrix<C64> {
        let d = self.trunc.block_dim();
        let (os, oa) = (ps.block_index() * d, pa.block_index() * d);
        let full_dim = self.trunc.full_dim();
        let mut out = DMatrix::zeros(d * d, d * d);
        let mut probe = DMatrix::zeros(full_dim, full_dim);
        for col in 0..d * d {
            let (i, j) = (col / d, col % d);
            probe[(os + i, oa + j)] = C64::new(1.0, 0.0);
            let image = self.apply(&probe);
            probe[(os + i, oa + j)] = zero();
            for row in 0..d * d {
                out[(row, col)] = image[(os + row / d, oa + row % d)];
            }
        }
        out
    }

    /// Superoperator on the whole row-major vectorised density matrix.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let n = self.trunc.full_dim();
        let mut out = DMatrix::zeros(n * n, n * n);
        let mut probe = DMatrix::zeros(n, n);
        for col in 0..n * n {
            probe[(col / n, col % n)] = C64::new(1.0, 0.0);
            let image = self.apply(&probe);
            probe[(col / n, col % n)] = zero();
            for row in 0..n * n {
                out[(row, col)] = image[(row / n, row % n)];
            }
        }
        out
    }
}

/// Time series sampled by [`evolve`]. Times are in units of `1/ν_c`;
/// `t_half_round_trip` rescales them to `π/(2ν_c)`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub t_half_round_trip: Vec<f64>,
    pub photon: Vec<f64>,
    pub qubit_excitation: Vec<f64>,
    pub parity: Vec<f64>,
    pub trace: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub hermiticity_error: Vec<f64>,
    /// Population of the sector(s) empty at `t = 0`.
    pub leakage: Vec<f64>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn worst(&self) -> InvariantReport {
        InvariantReport {
            trace_error: self
                .trace
                .iter()
                .map(|t| (t - 1.0).abs())
                .fold(0.0, f64::max),
            hermiticity_error: self.hermiticity_error.iter().copied().fold(0.0, f64::max),
            min_eigenvalue: self
                .min_eigenvalue
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            leakage: self.leakage.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn last(&self) -> Option<Observables> {
        let i = self.len().checked_sub(1)?;
        Some(Observables {
            photon: self.photon[i],
            qubit_excitation: self.qubit_excitation[i],
            parity: self.parity[i],
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub leakage: f64,
}

impl InvariantReport {
    pub fn within_tolerance(&self) -> bool {
        self.trace_error < TRACE_TOL
            && self.hermiticity_error < HERMITICITY_TOL
            && self.min_eigenvalue > -POSITIVITY_TOL
            && self.leakage < LEAKAGE_TOL
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveOptions {
    pub ode: OdeOptions,
    pub store_trajectory: bool,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub series: ObservableSeries,
    pub trajectory: Option<Vec<DensityMatrix>>,
    pub stats: OdeStats,
}

impl Evolution {
    pub fn final_state(&self) -> Option<&DensityMatrix> {
        self.trajectory.as_ref()?.last()
    }
}

fn check(t: f64, what: &'static str, value: f64, limit: f64) -> Result<()> {
    if value > ABORT_FACTOR * limit || value.is_nan() {
        return Err(Error::InvariantViolation {
            t,
            what,
            value,
            limit,
        });
    }
    if value > limit {
        log::warn!("{what} = {value:.3e} exceeds {limit:.0e} at t = {t:.4}");
    }
    Ok(())
}

/// Integrates the master equation from `rho0`, sampling observables and
/// invariants at each time in `t_grid` (units of `1/ν_c`, ascending, from 0).
pub fn evolve(
    rho0: &DensityMatrix,
    params: &ModelParams,
    t_grid: &[f64],
    opts: EvolveOptions,
) -> Result<Evolution> {
    let trunc = rho0.trunc();
    let start = rho0.invariants();
    if start.trace_error > TRACE_TOL
        || start.hermiticity_error > HERMITICITY_TOL
        || start.min_eigenvalue < -POSITIVITY_TOL
    {
        return Err(Error::InvalidParameter(
            "initial state is not a valid density matrix".into(),
        ));
    }
    let generator = build_lindblad_generator(params, trunc);
    let n = trunc.full_dim();
    let empty: Vec<ParitySector> = ParitySector::BOTH
        .into_iter()
        .filter(|&p| rho0.sector_population(p).abs() <= LEAKAGE_TOL)
        .collect();

    let mut series = ObservableSeries::default();
    let mut trajectory = opts.store_trajectory.then(Vec::new);
    let half_round_trip = std::f64::consts::FRAC_PI_2 / params.nu_c();
    let y0 = rho0.to_row_major();

    let stats = ode::integrate(
        |_, y, dy| {
            let rho = DMatrix::from_row_slice(n, n, y);
            let out = generator.apply(&rho);
            for (k, v) in dy.iter_mut().enumerate() {
                *v = out[(k / n, k % n)];
            }
        },
        0.0,
        &y0,
        t_grid,
        opts.ode,
        |_, t, y| {
            let rho = DensityMatrix::from_row_major(trunc, y)?;
            let inv = rho.invariants();
            let leak = empty
                .iter()
                .map(|&p| rho.sector_population(p).abs())
                .sum::<f64>();
            check(t, "trace error", inv.trace_error, TRACE_TOL)?;
            check(
                t,
                "hermiticity error",
                inv.hermiticity_error,
                HERMITICITY_TOL,
            )?;
            check(
                t,
                "negative eigenvalue",
                -inv.min_eigenvalue,
                POSITIVITY_TOL,
            )?;
            check(t, "parity leakage", leak, LEAKAGE_TOL)?;
            let obs = observables(&rho);
            series.t.push(t);
            series.t_half_round_trip.push(t / half_round_trip);
            series.photon.push(obs.photon);
            series.qubit_excitation.push(obs.qubit_excitation);
            series.parity.push(obs.parity);
            series.trace.push(rho.trace().re);
            series.min_eigenvalue.push(inv.min_eigenvalue);
            series.hermiticity_error.push(inv.hermiticity_error);
            series.leakage.push(leak);
            if let Some(tr) = trajectory.as_mut() {
                tr.push(rho);
            }
            Ok(())
        },
    )?;
    Ok(Evolution {
        series,
        trajectory,
        stats,
    })
}

fn series_difference(a: &ObservableSeries, b: &ObservableSeries) -> f64 {
    let diff = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    diff(&a.photon, &b.photon)
        .max(diff(&a.qubit_excitation, &b.qubit_excitation))
        .max(diff(&a.parity, &b.parity))
}

/// Largest change of the sampled observables when the cutoff is raised by
/// `by` (the initial state is rebuilt at the higher cutoff).
pub fn cutoff_sensitivity(
    init: BareStateLabel,
    params: &ModelParams,
    trunc: TruncationConfig,
    t_grid: &[f64],
    by: usize,
) -> Result<f64> {
    let a = evolve(
        &DensityMatrix::from_bare_state(init, trunc)?,
        params,
        t_grid,
        EvolveOptions::default(),
    )?;
    let b = evolve(
        &DensityMatrix::from_bare_state(init, trunc.raised(by))?,
        params,
        t_grid,
        EvolveOptions::default(),
    )?;
    Ok(series_difference(&a.series, &b.series))
}

/// Observable series whose samples have settled under cutoff increases.
#[derive(Debug, Clone)]
pub struct ConvergedSeries {
    pub series: ObservableSeries,
    pub n_max: usize,
    /// Largest sample change between the last two cutoffs.
    pub delta: f64,
    pub converged: bool,
}

/// Evolution from the bare state `init`, raising `n_max` by `step` from
/// `trunc` until every sampled observable moves by less than `tol`, or
/// `n_max` would exceed `max_n_max`. The series at the larger cutoff is kept.
pub fn converged_evolution(
    init: BareStateLabel,
    params: &ModelParams,
    trunc: TruncationConfig,
    t_grid: &[f64],
    step: usize,
    tol: f64,
    max_n_max: usize,
) -> Result<ConvergedSeries> {
    if step == 0 {
        return Err(Error::InvalidParameter(
            "cutoff step must be positive".into(),
        ));
    }
    let run = |t: TruncationConfig| -> Result<ObservableSeries> {
        Ok(evolve(
            &DensityMatrix::from_bare_state(init, t)?,
            params,
            t_grid,
            EvolveOptions::default(),
        )?
        .series)
    };
    let mut t = trunc;
    let mut series = run(t)?;
    let mut delta = f64::INFINITY;
    while t.n_max() + step <= max_n_max.max(trunc.n_max() + step) {
        t = t.raised(step);
        let next = run(t)?;
        delta = series_difference(&series, &next);
        series = next;
        if delta < tol {
            break;
        }
    }
    Ok(ConvergedSeries {
        series,
        n_max: t.n_max(),
        delta,
        converged: delta < tol,
    })
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub sector: ParitySector,
    /// Dimension of the generator's kernel within the sector.
    pub kernel_dim: usize,
    /// Trace-normalised kernel basis (Hermitian parts). With more than one
    /// element the result depends on the initial state through the conserved
    /// quantities, and `rho` is the projection of `rho0` onto the kernel.
    pub basis: Vec<DensityMatrix>,
    pub singular_values: Vec<f64>,
    /// `max |L(ρ_ss)|`.
    pub generator_residual: f64,
}

impl SteadyState {
    pub fn observables(&self) -> Observables {
        observables(&self.rho)
    }
}

fn embed_block(trunc: TruncationConfig, p: ParitySector, v: &DVector<C64>) -> DMatrix<C64> {
    let d = trunc.block_dim();
    let o = p.block_index() * d;
    let mut m = DMatrix::zeros(trunc.full_dim(), trunc.full_dim());
    for k in 0..d * d {
        m[(o + k / d, o + k % d)] = v[k];
    }
    m
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Stationary state reached from `rho0`, from the null space of the
/// generator restricted to the parity sector of `rho0`.
pub fn steady_state(params: &ModelParams, rho0: &DensityMatrix) -> Result<SteadyState> {
    let trunc = rho0.trunc();
    let sector = rho0.parity_sector()?;
    let generator = build_lindblad_generator(params, trunc);
    let s = generator.sector_superoperator(sector, sector);
    let scale = s.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let ns = linalg::null_space(&s, NULL_TOL * scale)?;
    if ns.dim() == 0 {
        return Err(Error::NullSpace(format!(
            "no singular value below {:.1e} in sector {sector} (smallest {:.3e})",
            NULL_TOL * scale,
            ns.singular_values
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        )));
    }
    let block0 = DVector::from_iterator(trunc.block_dim().pow(2), {
        let b = rho0.block(sector, sector);
        let d = trunc.block_dim();
        (0..d * d).map(move |k| b[(k / d, k % d)])
    });
    let projected = ns.project(&block0)?;
    let mut m = hermitian_part(&embed_block(trunc, sector, &projected));
    let tr = m.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::NullSpace(
            "projected steady state has zero trace".into(),
        ));
    }
    m /= tr;
    let rho = DensityMatrix::new(trunc, m)?;

    let basis = (0..ns.dim())
        .map(|k| {
            let mut b = hermitian_part(&embed_block(trunc, sector, &ns.right[k]));
            let tr = b.trace();
            if tr.norm() > 1e-12 {
                b /= tr;
            }
            DensityMatrix::new(trunc, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let generator_residual = generator
        .apply(rho.matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if ns.dim() > 1 {
        log::info!(
            "kernel of dimension {} in sector {sector}; steady state depends on the initial state",
            ns.dim()
        );
    }
    Ok(SteadyState {
        rho,
        sector,
        kernel_dim: ns.dim(),
        basis,
        singular_values: ns.singular_values,
        generator_residual,
    })
}

/// Steady state whose observables have settled under cutoff increases.
#[derive(Debug, Clone)]
pub struct ConvergedSteadyState {
    pub state: SteadyState,
    /// Largest observable change between the last two cutoffs.
    pub delta: f64,
    pub converged: bool,
}

/// Steady state from the bare state `init`, raising `n_max` by `step` from
/// `trunc` until photon and qubit populations move by less than `tol`, or
/// `n_max` would exceed `max_n_max`.
pub fn converged_steady_state(
    params: &ModelParams,
    init: BareStateLabel,
    trunc: TruncationConfig,
    step: usize,
    tol: f64,
    max_n_max: usize,
) -> Result<ConvergedSteadyState> {
    if step == 0 {
        return Err(Error::InvalidParameter(
            "cutoff step must be positive".into(),
        ));
    }
    let mut t = trunc;
    let mut state = steady_state(params, &DensityMatrix::from_bare_state(init, t)?)?;
    let mut delta = f64::INFINITY;
    while t.n_max() + step <= max_n_max.max(trunc.n_max() + step) {
        t = t.raised(step);
        let next = steady_state(params, &DensityMatrix::from_bare_state(init, t)?)?;
        let (a, b) = (state.observables(), next.observables());
        delta = (a.photon - b.photon)
            .abs()
            .max((a.qubit_excitation - b.qubit_excitation).abs());
        state = next;
        if delta < tol {
            break;
        }
    }
    Ok(ConvergedSteadyState {
        state,
        delta,
        converged: delta < tol,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SteadyStateCheck {
    /// Time at which the observable drift fell below the threshold.
    pub t_final: f64,
    /// Largest `|dO/dt|` over the last chunk.
    pub drift: f64,
    /// Largest observable difference against the null-space result.
    pub max_difference: f64,
    pub converged: bool,
}

/// Long-time evolution of `rho0` in chunks of `chunk` until every observable
/// drifts by less than `drift_tol` per unit time (or `t_max` is reached),
/// then compared with `ss`.
pub fn verify_steady_state_by_evolution(
    params: &ModelParams,
    rho0: &DensityMatrix,
    ss: &SteadyState,
    chunk: f64,
    t_max: f64,
    drift_tol: f64,
) -> Result<SteadyStateCheck> {
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut prev = observables(&rho);
    let opts = EvolveOptions {
        store_trajectory: true,
        ..Default::default()
    };
    let target = ss.observables();
    loop {
        let ev = evolve(&rho, params, &[0.0, chunk], opts)?;
        rho = ev
            .final_state()
            .cloned()
            .ok_or_else(|| Error::NullSpace("empty trajectory".into()))?;
        t += chunk;
        let now = observables(&rho);
        let drift = [
            now.photon - prev.photon,
            now.qubit_excitation - prev.qubit_excitation,
            now.parity - prev.parity,
        ]
        .iter()
        .map(|d| d.abs() / chunk)
        .fold(0.0, f64::max);
        prev = now;
        if drift < drift_tol || t >= t_max {
            let max_difference = [
                now.photon - target.photon,
                now.qubit_excitation - target.qubit_excitation,
                now.parity - target.parity,
            ]
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max);
            return Ok(SteadyStateCheck {
                t_final: t,
                drift,
                max_difference,
                converged: drift < drift_tol,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeWeight {
    pub label: Label,
    pub omega: C64,
    pub weight: f64,
    /// `|⟨L̂_n|R̂_n⟩|` of the unit-normalised pair.
    pub condition: f64,
    pub near_defective: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenmodeWeights {
    pub initial: BareStateLabel,
    pub parity: ParitySector,
    pub normalization: Normalization,
    pub weights: Vec<ModeWeight>,
}

impl EigenmodeWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().map(|w| w.weight).sum()
    }

    pub fn get(&self, n_g: usize) -> Option<&ModeWeight> {
        self.weights.iter().find(|w| w.label.n_g == n_g)
    }
}

/// Biorthogonal weights `|⟨L_n|ψ0⟩⟨ψ0|R_n⟩|`, normalised to sum 1, of the
/// bare state `psi0` on the modes of its parity block. `labels[k]` names
/// column `k` of `modes`.
pub fn project_initial_state_onto_eigenmodes(
    psi0: BareStateLabel,
    modes: &Eigensystem,
    labels: &[Label],
) -> Result<EigenmodeWeights> {
    let s = psi0.to_number_parity();
    let dim = modes.dim();
    if labels.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: labels.len(),
        });
    }
    if s.m >= dim {
        return Err(Error::InvalidParameter(format!(
            "{psi0} lies above the cutoff"
        )));
    }
    if let Some(l) = labels.iter().find(|l| l.parity != s.parity) {
        return Err(Error::InvalidParameter(format!(
            "mode {l} is not in the parity sector of {psi0}"
        )));
    }
    // ⟨L_n|ψ0⟩ = conj(left[m, n]) and ⟨ψ0|R_n⟩ = right[m, n].
    let raw: Vec<f64> = (0..dim)
        .map(|k| (modes.left[(s.m, k)].conj() * modes.right[(s.m, k)]).norm())
        .collect();
    let total: f64 = raw.iter().sum();
    let weights = (0..dim)
        .map(|k| ModeWeight {
            label: labels[k],
            omega: modes.values[k],
            weight: raw[k] / total,
            condition: modes.condition[k],
            near_defective: modes.condition[k] < DEFECTIVE_TOL,
        })
        .collect::<Vec<_>>();
    for w in weights.iter().filter(|w| w.near_defective) {
        log::warn!(
            "mode {} is near-defective (condition {:.2e})",
            w.label,
            w.condition
        );
    }
    Ok(EigenmodeWeights {
        initial: psi0,
        parity: s.parity,
        normalization: Normalization::Biorthogonal,
        weights,
    })
}

/// [`project_initial_state_onto_eigenmodes`] on a fresh eigen-decomposition,
/// labelling modes by their rank in real part.
pub fn eigenmode_weights(
    psi0: BareStateLabel,
    params: &ModelParams,
    trunc: TruncationConfig,
) -> Result<EigenmodeWeights> {
    let p = psi0.to_number_parity().parity;
    let block = crate::model::build_phenomenological_hamiltonian(params, p, trunc);
    let modes = linalg::eigensystem(&block.matrix)?;
    let labels: Vec<Label> = (0..modes.dim())
        .map(|n_g| Label { n_g, parity: p })
        .collect();
    project_initial_state_onto_eigenmodes(psi0, &modes, &labels)
}

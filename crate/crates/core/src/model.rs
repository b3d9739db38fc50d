//! Physical parameters, number–parity basis bookkeeping and the Hamiltonian
//! builders.
//!
//! The Rabi Hamiltonian is written in terms of the boson `b = σˣ a`, which
//! commutes with the total parity `P = -σᶻ (-1)^{a†a}`. In the basis
//! `|m, p⟩` (`b†b |m,p⟩ = m |m,p⟩`, `P |m,p⟩ = p |m,p⟩`) it is block diagonal,
//! and each block is real symmetric tridiagonal:
//!
//! ```text
//! H_p[m][m]   = m ν_c − (p/2) ν_q (−1)^m
//! H_p[m][m+1] = H_p[m+1][m] = g √(m+1)
//! ```
//!
//! Two-photon loss `D[a²] = D[b²]` preserves parity, so the phenomenological
//! effective Hamiltonian only adds `−i κ_c2 m(m−1)` on the diagonal.
//!
//! Full-space ordering is the `p = +1` block (ascending `m`) followed by the
//! `p = −1` block.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// The four physical rates, all in units of the cavity frequency by convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    nu_c: f64,
    nu_q: f64,
    g: f64,
    kappa_c2: f64,
}

#[derive(Deserialize)]
struct RawParams {
    nu_c: f64,
    nu_q: f64,
    g: f64,
    kappa_c2: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.nu_c, raw.nu_q, raw.g, raw.kappa_c2)
    }
}

impl ModelParams {
    pub fn new(nu_c: f64, nu_q: f64, g: f64, kappa_c2: f64) -> Result<Self> {
        if !(nu_c.is_finite() && nu_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nu_c must be > 0, got {nu_c}"
            )));
        }
        if !nu_q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "nu_q must be finite, got {nu_q}"
            )));
        }
        // The spectrum only depends on |g|; the negative sign is rejected so
        // branch labels stay unambiguous.
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!("g must be >= 0, got {g}")));
        }
        if !(kappa_c2.is_finite() && kappa_c2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa_c2 must be >= 0, got {kappa_c2}"
            )));
        }
        Ok(Self {
            nu_c,
            nu_q,
            g,
            kappa_c2,
        })
    }

    /// `ν_c = 1`, `ν_q = 0.8`, `κ_c2 = 1/40`, `g = 0`.
    pub fn reference() -> Self {
        Self {
            nu_c: 1.0,
            nu_q: 0.8,
            g: 0.0,
            kappa_c2: 1.0 / 40.0,
        }
    }

    pub fn nu_c(&self) -> f64 {
        self.nu_c
    }
    pub fn nu_q(&self) -> f64 {
        self.nu_q
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn kappa_c2(&self) -> f64 {
        self.kappa_c2
    }

    pub fn with_g(self, g: f64) -> Result<Self> {
        Self::new(self.nu_c, self.nu_q, g, self.kappa_c2)
    }

    pub fn with_kappa_c2(self, kappa_c2: f64) -> Result<Self> {
        Self::new(self.nu_c, self.nu_q, self.g, kappa_c2)
    }

    pub fn with_nu_q(self, nu_q: f64) -> Result<Self> {
        Self::new(self.nu_c, nu_q, self.g, self.kappa_c2)
    }

    pub fn is_closed(&self) -> bool {
        self.kappa_c2 == 0.0
    }
}

/// Eigenvalue of the total parity operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParitySector {
    #[serde(rename = "+")]
    Even,
    #[serde(rename = "-")]
    Odd,
}

impl ParitySector {
    pub const BOTH: [ParitySector; 2] = [ParitySector::Even, ParitySector::Odd];

    pub fn sign(self) -> f64 {
        match self {
            ParitySector::Even => 1.0,
            ParitySector::Odd => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(ParitySector::Even),
            -1 => Ok(ParitySector::Odd),
            other => Err(Error::InvalidParameter(format!(
                "parity must be ±1, got {other}"
            ))),
        }
    }

    /// `(−1)^n`.
    pub fn of_power(n: usize) -> Self {
        if n % 2 == 0 {
            ParitySector::Even
        } else {
            ParitySector::Odd
        }
    }

    pub fn flip(self) -> Self {
        match self {
            ParitySector::Even => ParitySector::Odd,
            ParitySector::Odd => ParitySector::Even,
        }
    }

    /// Position of the block in the full-space ordering.
    pub fn block_index(self) -> usize {
        match self {
            ParitySector::Even => 0,
            ParitySector::Odd => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            ParitySector::Even => '+',
            ParitySector::Odd => '-',
        }
    }
}

impl fmt::Display for ParitySector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for ParitySector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "+1" | "1" | "even" => Ok(ParitySector::Even),
            "-" | "-1" | "odd" => Ok(ParitySector::Odd),
            other => Err(Error::InvalidParameter(format!("unknown parity {other:?}"))),
        }
    }
}

/// Boson cutoff: `m = 0..=n_max` is kept in every parity block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTruncation")]
pub struct TruncationConfig {
    n_max: usize,
}

#[derive(Deserialize)]
struct RawTruncation {
    n_max: usize,
}

impl TryFrom<RawTruncation> for TruncationConfig {
    type Error = Error;

    fn try_from(raw: RawTruncation) -> Result<Self> {
        TruncationConfig::new(raw.n_max)
    }
}

impl TruncationConfig {
    pub fn new(n_max: usize) -> Result<Self> {
        // b² vanishes identically below m = 2.
        if n_max < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_max must be >= 2, got {n_max}"
            )));
        }
        Ok(Self { n_max })
    }

    /// Cutoff given as a number of retained levels per boson.
    pub fn from_levels(levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidParameter(
                "at least one level is required".into(),
            ));
        }
        Self::new(levels - 1)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Dimension of one parity block.
    pub fn block_dim(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the full (both parities) space.
    pub fn full_dim(&self) -> usize {
        2 * self.block_dim()
    }

    pub fn raised(&self, by: usize) -> Self {
        Self {
            n_max: self.n_max + by,
        }
    }

    /// Full-space index of `|m, p⟩`.
    pub fn index(&self, m: usize, p: ParitySector) -> usize {
        debug_assert!(m <= self.n_max);
        p.block_index() * self.block_dim() + m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl Qubit {
    pub fn letter(self) -> char {
        match self {
            Qubit::Ground => 'g',
            Qubit::Excited => 'e',
        }
    }
}

/// Bare state `|n, g⟩` or `|n, e⟩` in the number–excitation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BareStateLabel {
    pub n: usize,
    pub qubit: Qubit,
}

/// Basis state `|m, p⟩` of the number–parity representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NumberParityState {
    pub m: usize,
    pub parity: ParitySector,
}

impl BareStateLabel {
    pub fn new(n: usize, qubit: Qubit) -> Self {
        Self { n, qubit }
    }

    pub fn to_number_parity(self) -> NumberParityState {
        NumberParityState {
            m: self.n,
            parity: parity_of_bare_state(self),
        }
    }

    pub fn from_number_parity(state: NumberParityState) -> Self {
        let qubit = if ParitySector::of_power(state.m) == state.parity {
            Qubit::Ground
        } else {
            Qubit::Excited
        };
        Self { n: state.m, qubit }
    }
}

impl fmt::Display for BareStateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.n, self.qubit.letter())
    }
}

impl FromStr for BareStateLabel {
    type Err = Error;

    /// Parses `"n,g"` or `"n,e"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidParameter(format!("initial state must look like \"2,g\", got {s:?}"));
        let (n, q) = s.split_once(',').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        let qubit = match q.trim() {
            "g" => Qubit::Ground,
            "e" => Qubit::Excited,
            _ => return Err(bad()),
        };
        Ok(Self { n, qubit })
    }
}

/// Bare-state correspondence: `|n,g⟩ ↦ p = (−1)^n`, `|n,e⟩ ↦ p = (−1)^{n+1}`.
pub fn parity_of_bare_state(label: BareStateLabel) -> ParitySector {
    match label.qubit {
        Qubit::Ground => ParitySector::of_power(label.n),
        Qubit::Excited => ParitySector::of_power(label.n + 1),
    }
}

/// `σᶻ` eigenvalue of `|m, p⟩`, i.e. `−(−1)^m p`.
pub fn sigma_z(state: NumberParityState) -> f64 {
    -ParitySector::of_power(state.m).sign() * state.parity.sign()
}

/// Dense matrix of one parity block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityBlockHamiltonian {
    pub parity: ParitySector,
    pub matrix: DMatrix<C64>,
}

impl ParityBlockHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let m = &self.matrix;
        (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
    }
}

fn bare_diagonal(params: &ModelParams, p: ParitySector, m: usize) -> f64 {
    m as f64 * params.nu_c - 0.5 * p.sign() * params.nu_q * ParitySector::of_power(m).sign()
}

pub fn build_closed_parity_hamiltonian(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
) -> ParityBlockHamiltonian {
    let dim = trunc.block_dim();
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for m in 0..dim {
        h[(m, m)] = C64::new(bare_diagonal(params, p, m), 0.0);
        if m + 1 < dim {
            let off = C64::new(params.g * ((m + 1) as f64).sqrt(), 0.0);
            h[(m, m + 1)] = off;
            h[(m + 1, m)] = off;
        }
    }
    ParityBlockHamiltonian {
        parity: p,
        matrix: h,
    }
}

/// Closed block plus the two-photon decay `−i κ_c2 m(m−1)` on the diagonal.
pub fn build_phenomenological_hamiltonian(
    params: &ModelParams,
    p: ParitySector,
    trunc: TruncationConfig,
) -> ParityBlockHamiltonian {
    let mut block = build_closed_parity_hamiltonian(params, p, trunc);
    if params.kappa_c2 != 0.0 {
        for m in 2..block.dim() {
            block.matrix[(m, m)].im = -params.kappa_c2 * (m * (m - 1)) as f64;
        }
    }
    block
}

/// Phenomenological JC doublet `{|n−1,e⟩, |n,g⟩}`.
pub fn build_jc_block(params: &ModelParams, n: usize) -> Result<Matrix2<C64>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "JC doublets start at n = 1; |0,g⟩ is a singlet".into(),
        ));
    }
    let nf = n as f64;
    let k = params.kappa_c2;
    let coupling = C64::new(params.g * nf.sqrt(), 0.0);
    let upper_left = C64::new(
        (nf - 1.0) * params.nu_c + 0.5 * params.nu_q,
        -((n - 1) as f64) * (nf - 2.0) * k,
    );
    let lower_right = C64::new(nf * params.nu_c - 0.5 * params.nu_q, -(nf - 1.0) * nf * k);
    Ok(Matrix2::new(upper_left, coupling, coupling, lower_right))
}

/// Operators on the full space (both parity blocks).
pub mod full {
    use super::*;

    fn block_diagonal(plus: &DMatrix<C64>, minus: &DMatrix<C64>) -> DMatrix<C64> {
        let d = plus.nrows();
        let mut out = DMatrix::<C64>::zeros(2 * d, 2 * d);
        out.view_mut((0, 0), (d, d)).copy_from(plus);
        out.view_mut((d, d), (d, d)).copy_from(minus);
        out
    }

    /// `H_s` (closed) or `H_s,ef` (with decay), block diagonal in parity.
    pub fn hamiltonian(
        params: &ModelParams,
        trunc: TruncationConfig,
        with_decay: bool,
    ) -> DMatrix<C64> {
        let build = if with_decay {
            build_phenomenological_hamiltonian
        } else {
            build_closed_parity_hamiltonian
        };
        block_diagonal(
            &build(params, ParitySector::Even, trunc).matrix,
            &build(params, ParitySector::Odd, trunc).matrix,
        )
    }

    /// Single-block boson lowering operator `b |m⟩ = √m |m−1⟩`.
    pub fn block_lowering(dim: usize) -> DMatrix<C64> {
        DMatrix::from_fn(dim, dim, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `b` on the full space; it acts within each parity block.
    pub fn lowering(trunc: TruncationConfig) -> DMatrix<C64> {
        let b = block_lowering(trunc.block_dim());
        block_diagonal(&b, &b)
    }

    /// Diagonal of `b†b`.
    pub fn number_diagonal(trunc: TruncationConfig) -> Vec<f64> {
        (0..trunc.full_dim())
            .map(|i| (i % trunc.block_dim()) as f64)
            .collect()
    }

    /// Diagonal of the parity operator.
    pub fn parity_diagonal(trunc: TruncationConfig) -> Vec<f64> {
        (0..trunc.full_dim())
            .map(|i| if i < trunc.block_dim() { 1.0 } else { -1.0 })
            .collect()
    }

    /// Diagonal of `σᶻ = −(−1)^{b†b} P`.
    pub fn sigma_z_diagonal(trunc: TruncationConfig) -> Vec<f64> {
        (0..trunc.full_dim())
            .map(|i| {
                let parity = if i < trunc.block_dim() {
                    ParitySector::Even
                } else {
                    ParitySector::Odd
                };
                sigma_z(NumberParityState {
                    m: i % trunc.block_dim(),
                    parity,
                })
            })
            .collect()
    }
}

//! Exact ground states of the cluster-Ising chain by Lanczos iteration on a
//! matrix-free Hamiltonian applicator, plus expectation values and
//! energy-curvature phase-boundary scans.
//!
//! The Hamiltonian is real symmetric in the computational basis, so the
//! eigensolver runs on real vectors; complex amplitudes appear only in the
//! public [`StateVector`].

use std::io::{BufRead, Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{hamiltonian_terms, HamiltonianParams, PauliString};
use crate::{exec, Error, Result};

/// Hard cap on simulated chain length: 2^20 amplitudes.
pub const MAX_SITES: u32 = 20;

/// Dense state on `n` qubits in the computational (Z) basis.
///
/// Site 1 is the most significant bit of the amplitude index.
#[derive(Clone, Debug)]
pub struct StateVector {
    n: u32,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(n: u32, amps: Vec<Complex64>) -> Result<Self> {
        check_sites(n)?;
        if amps.len() != 1 << n {
            return Err(Error::input(format!(
                "expected 2^{n} amplitudes, got {}",
                amps.len()
            )));
        }
        Ok(StateVector { n, amps })
    }

    /// `|+>^{(x)n}`.
    pub fn plus_state(n: u32) -> Self {
        check_sites(n).expect("chain too long");
        let dim = 1usize << n;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        StateVector {
            n,
            amps: vec![a; dim],
        }
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(n: u32, index: usize) -> Self {
        check_sites(n).expect("chain too long");
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Index bit of `site` (1-based) in basis index `b`.
    #[inline]
    pub fn bit_of(&self, b: usize, site: u32) -> usize {
        (b >> (self.n - site)) & 1
    }

    /// Bit mask selecting `site` in a basis index.
    #[inline]
    pub fn site_mask(&self, site: u32) -> usize {
        1usize << (self.n - site)
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}

fn check_sites(n: u32) -> Result<()> {
    if n == 0 || n > MAX_SITES {
        return Err(Error::input(format!(
            "chain length {n} outside supported range 1..={MAX_SITES}"
        )));
    }
    Ok(())
}

/// One Hamiltonian term compiled to index masks: `coef * Z(mz) X(mx)` with
/// disjoint X and Z supports (all cluster-Ising terms have this form).
#[derive(Clone, Copy, Debug)]
struct MaskTerm {
    coef: f64,
    mx: usize,
    mz: usize,
}

fn compile_terms(terms: &[(f64, PauliString)], n: u32) -> Vec<MaskTerm> {
    use crate::model::Pauli;
    terms
        .iter()
        .map(|(coef, p)| {
            assert_eq!(p.phase_exp(), 0, "Hamiltonian terms carry phase +1");
            let mut mx = 0usize;
            let mut mz = 0usize;
            for (site, letter) in p.letters() {
                let mask = 1usize << (n - site);
                match letter {
                    Pauli::X => mx |= mask,
                    Pauli::Z => mz |= mask,
                    Pauli::Y => unreachable!("no Y letters in the Hamiltonian"),
                }
            }
            MaskTerm {
                coef: *coef,
                mx,
                mz,
            }
        })
        .collect()
}

trait Scalar: Copy + Send + Sync + std::ops::AddAssign + std::ops::Mul<f64, Output = Self> {
    fn zero() -> Self;
}
impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
}
impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

/// `out[b] = sum_terms coef * (-1)^{|(b^mx) & mz|} * v[b ^ mx]`, i.e. `H v`
/// without materializing the matrix. Parallel over output blocks.
fn apply_masked<T: Scalar>(terms: &[MaskTerm], v: &[T], out: &mut [T]) {
    let dim = v.len();
    let apply_block = |(start, chunk): (usize, &mut [T])| {
        for (off, slot) in chunk.iter_mut().enumerate() {
            let b = start + off;
            let mut acc = T::zero();
            for t in terms {
                let src = b ^ t.mx;
                let sign = if ((src & t.mz).count_ones() & 1) == 1 {
                    -t.coef
                } else {
                    t.coef
                };
                acc += v[src] * sign;
            }
            *slot = acc;
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        const BLOCK: usize = 1 << 12;
        if dim > BLOCK {
            out.par_chunks_mut(BLOCK)
                .enumerate()
                .for_each(|(i, chunk)| apply_block((i * BLOCK, chunk)));
            return;
        }
    }
    apply_block((0, out));
}

/// Applies the open-boundary cluster-Ising Hamiltonian to a state.
pub fn apply_hamiltonian(params: &HamiltonianParams, v: &StateVector) -> Result<StateVector> {
    params.validate()?;
    check_sites(params.n)?;
    if v.n != params.n {
        return Err(Error::input(format!(
            "state on {} sites, Hamiltonian on {}",
            v.n, params.n
        )));
    }
    let terms = compile_terms(&hamiltonian_terms(params), params.n);
    let mut out = vec![Complex64::new(0.0, 0.0); v.amps.len()];
    apply_masked(&terms, &v.amps, &mut out);
    Ok(StateVector {
        n: params.n,
        amps: out,
    })
}

/// `<state| p |state>` for a Hermitian Pauli string supported on the chain.
pub fn expectation(p: &PauliString, state: &StateVector) -> Result<f64> {
    use crate::model::Pauli;
    if !p.is_hermitian() {
        return Err(Error::input(format!("non-Hermitian phase on {p}")));
    }
    if let Some(max) = p.max_site() {
        if max > state.n {
            return Err(Error::input(format!(
                "operator touches site {max} beyond chain length {}",
                state.n
            )));
        }
    }
    let mut mx = 0usize;
    let mut m_zy = 0usize;
    let mut base_exp = p.phase_exp() as u32;
    for (site, letter) in p.letters() {
        let mask = state.site_mask(site);
        match letter {
            Pauli::X => mx |= mask,
            Pauli::Z => m_zy |= mask,
            Pauli::Y => {
                mx |= mask;
                m_zy |= mask;
                base_exp += 1;
            }
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, amp) in state.amps.iter().enumerate() {
        let exp = (base_exp + 2 * (s & m_zy).count_ones()) % 4;
        let phase = match exp {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        acc += state.amps[s ^ mx].conj() * phase * amp;
    }
    debug_assert!(
        acc.im.abs() < 1e-10,
        "imaginary part {} on Hermitian operator",
        acc.im
    );
    Ok(acc.re)
}

/// Result of a ground-state solve.
#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub energy: f64,
    pub state: StateVector,
    /// `|| H psi - E0 psi ||`.
    pub residual: f64,
    /// Ritz estimate of `E1 - E0` from a deflated second pass.
    pub gap_estimate: f64,
    /// Raised when the gap estimate falls below `100 * tol`.
    pub degenerate: bool,
}

/// Solver knobs; [`ground_state`] uses the defaults.
#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_krylov: usize,
    /// Restart from the best Ritz vector this many times before giving up.
    pub restarts: usize,
    /// Add a `-eps X_1` pinning term with `eps = 1e-6 * max|coupling|`.
    /// Off by default: degeneracies are surfaced, not silently broken.
    pub edge_pinning: bool,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            max_krylov: 200,
            restarts: 1,
            edge_pinning: false,
            seed: 0x5eed_c0de,
        }
    }
}

/// Ground state with default options at the given tolerance.
pub fn ground_state(params: &HamiltonianParams, tol: f64) -> Result<GroundStateResult> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::input(format!("tolerance {tol} outside (0, 1e-6]")));
    }
    ground_state_with(
        params,
        LanczosOptions {
            tol,
            ..LanczosOptions::default()
        },
    )
}

pub fn ground_state_with(
    params: &HamiltonianParams,
    opts: LanczosOptions,
) -> Result<GroundStateResult> {
    params.validate()?;
    check_sites(params.n)?;
    let mut ham = hamiltonian_terms(params);
    if opts.edge_pinning {
        let eps = 1e-6
            * [params.j1, params.j2, params.h1, params.h2]
                .iter()
                .fold(0.0f64, |m, c| m.max(c.abs()));
        if eps > 0.0 {
            ham.push((-eps, PauliString::x(1)));
        }
    }
    let terms = compile_terms(&ham, params.n);
    let dim = 1usize << params.n;

    let ground = lanczos_lowest(&terms, dim, &opts, &[])?;
    // Second pass in the orthogonal complement of the ground vector: its
    // lowest Ritz value estimates E1 even for exactly degenerate spectra.
    // A fresh start vector is essential: within a degenerate eigenspace
    // the Krylov space only ever sees the start vector's projection, which
    // for the original seed is exactly the vector being deflated.
    let deflated_opts = LanczosOptions {
        seed: opts.seed.wrapping_add(1),
        ..opts
    };
    let deflated = lanczos_lowest(&terms, dim, &deflated_opts, &[&ground.vector]);
    let gap_estimate = match deflated {
        Ok(d) => (d.energy - ground.energy).max(0.0),
        // The complement solve failing to converge does not invalidate E0;
        // flag the gap as unknown-small.
        Err(_) => 0.0,
    };

    let amps = ground
        .vector
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    Ok(GroundStateResult {
        energy: ground.energy,
        state: StateVector {
            n: params.n,
            amps,
        },
        residual: ground.residual,
        gap_estimate,
        degenerate: gap_estimate < 100.0 * opts.tol,
    })
}

struct LanczosOutcome {
    energy: f64,
    vector: Vec<f64>,
    residual: f64,
    /// Lowest Ritz value after each iteration, concatenated across restarts.
    ritz_history: Vec<f64>,
}

/// Lanczos with full reorthogonalization for the lowest eigenpair, keeping
/// the Krylov space orthogonal to `deflate`.
fn lanczos_lowest(
    terms: &[MaskTerm],
    dim: usize,
    opts: &LanczosOptions,
    deflate: &[&Vec<f64>],
) -> Result<LanczosOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut history = Vec::new();

    for _attempt in 0..=opts.restarts {
        project_out(&mut v0, deflate);
        normalize(&mut v0)?;

        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![0.0f64; dim];

        let max_k = opts.max_krylov.min(dim);
        for k in 0..max_k {
            apply_masked(terms, &basis[k], &mut w);
            let alpha = dot(&basis[k], &w);
            alphas.push(alpha);
            axpy(&mut w, -alpha, &basis[k]);
            if k > 0 {
                let beta_prev = betas[k - 1];
                axpy(&mut w, -beta_prev, &basis[k - 1]);
            }
            // Full reorthogonalization, twice for safety.
            for _ in 0..2 {
                for b in basis.iter() {
                    let c = dot(b, &w);
                    axpy(&mut w, -c, b);
                }
                project_out(&mut w, deflate);
            }

            let (theta, ritz_coeffs) = lowest_ritz(&alphas, &betas);
            history.push(theta);

            let beta = dot(&w, &w).sqrt();
            let est = beta * ritz_coeffs.last().copied().unwrap_or(1.0).abs();
            let done = est < opts.tol * 0.1 || beta < 1e-14 || k + 1 == max_k;
            if done {
                let mut vec = vec![0.0f64; dim];
                for (c, b) in ritz_coeffs.iter().zip(basis.iter()) {
                    axpy(&mut vec, *c, b);
                }
                normalize(&mut vec)?;
                let mut hv = vec![0.0f64; dim];
                apply_masked(terms, &vec, &mut hv);
                let energy = dot(&vec, &hv);
                axpy(&mut hv, -energy, &vec);
                let residual = dot(&hv, &hv).sqrt();
                if residual < opts.tol {
                    return Ok(LanczosOutcome {
                        energy,
                        vector: vec,
                        residual,
                        ritz_history: history,
                    });
                }
                if beta < 1e-14 {
                    // Krylov space exhausted (invariant subspace); accept.
                    return Ok(LanczosOutcome {
                        energy,
                        vector: vec,
                        residual,
                        ritz_history: history,
                    });
                }
                if k + 1 == max_k {
                    // Restart from the current best Ritz vector.
                    v0 = vec;
                    break;
                }
            }
            let inv = 1.0 / beta;
            let next: Vec<f64> = w.iter().map(|&x| x * inv).collect();
            betas.push(beta);
            basis.push(next);
        }
    }
    Err(Error::NonConvergence(format!(
        "no Ritz pair below residual {} within {} Krylov vectors and {} restarts",
        opts.tol, opts.max_krylov, opts.restarts
    )))
}

/// Lowest eigenvalue and eigenvector of the current tridiagonal matrix.
fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    if k == 1 {
        return (alphas[0], vec![1.0]);
    }
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut lo = 0;
    for i in 1..k {
        if eig.eigenvalues[i] < eig.eigenvalues[lo] {
            lo = i;
        }
    }
    let col = eig.eigenvectors.column(lo);
    (eig.eigenvalues[lo], col.iter().copied().collect())
}

/// Exposed for the variational-monotonicity tests: the sequence of lowest
/// Ritz values while solving `params` from a fixed seed.
pub fn ritz_history(params: &HamiltonianParams, opts: LanczosOptions) -> Result<Vec<f64>> {
    let terms = compile_terms(&hamiltonian_terms(params), params.n);
    let out = lanczos_lowest(&terms, 1usize << params.n, &opts, &[])?;
    Ok(out.ritz_history)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    exec::pairwise_sum(&prods)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = dot(v, v).sqrt();
    if n < 1e-300 {
        return Err(Error::NonConvergence("zero vector in Lanczos".into()));
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(())
}

fn project_out(v: &mut [f64], others: &[&Vec<f64>]) {
    for o in others {
        let c = dot(o, v);
        axpy(v, -c, o);
    }
}

/// Coupling selected by a phase-boundary scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingAxis {
    J1,
    J2,
    H1,
    H2,
}

impl CouplingAxis {
    pub fn set(&self, params: &mut HamiltonianParams, value: f64) {
        match self {
            CouplingAxis::J1 => params.j1 = value,
            CouplingAxis::J2 => params.j2 = value,
            CouplingAxis::H1 => params.h1 = value,
            CouplingAxis::H2 => params.h2 = value,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CurvaturePoint {
    pub lambda: f64,
    pub energy: f64,
    /// Central-difference `d2 E0 / d lambda^2`; `None` at the grid ends.
    pub curvature: Option<f64>,
}

/// Ground energy along a uniform coupling grid with its second derivative;
/// curvature peaks mark phase-boundary candidates.
pub fn curvature_scan(
    base: &HamiltonianParams,
    axis: CouplingAxis,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<CurvaturePoint>> {
    if grid.len() < 5 {
        return Err(Error::input("curvature scan needs at least 5 grid points"));
    }
    let h = grid[1] - grid[0];
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(Error::input("curvature scan grid must be uniform"));
        }
    }
    let energies: Vec<f64> = grid
        .iter()
        .map(|&lambda| {
            let mut p = *base;
            axis.set(&mut p, lambda);
            ground_state(&p, tol).map(|g| g.energy)
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let curvature = (i > 0 && i + 1 < grid.len())
                .then(|| (energies[i - 1] - 2.0 * energies[i] + energies[i + 1]) / (h * h));
            CurvaturePoint {
                lambda,
                energy: energies[i],
                curvature,
            }
        })
        .collect())
}

/// Local curvature maxima, strongest first.
pub fn boundary_candidates(points: &[CurvaturePoint]) -> Vec<f64> {
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..points.len().saturating_sub(1) {
        let (Some(c), prev, next) = (
            points[i].curvature,
            points[i - 1].curvature.unwrap_or(f64::NEG_INFINITY),
            points[i + 1].curvature.unwrap_or(f64::NEG_INFINITY),
        ) else {
            continue;
        };
        if c >= prev && c >= next {
            peaks.push((points[i].lambda, c));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.into_iter().map(|(l, _)| l).collect()
}

/// Writes a ground-state result as a plain-text metadata header followed by
/// a blank line and little-endian interleaved re/im amplitude bytes.
pub fn write_state_dump<W: Write>(
    mut w: W,
    params: &HamiltonianParams,
    result: &GroundStateResult,
    path_for_err: &str,
) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path_for_err.to_string(),
        source,
    };
    writeln!(w, "format=spt-qcnn-groundstate v1").map_err(io_err)?;
    writeln!(w, "n={}", params.n).map_err(io_err)?;
    writeln!(
        w,
        "j1={:e} j2={:e} h1={:e} h2={:e}",
        params.j1, params.j2, params.h1, params.h2
    )
    .map_err(io_err)?;
    writeln!(w, "energy={:.17e}", result.energy).map_err(io_err)?;
    writeln!(w, "residual={:.17e}", result.residual).map_err(io_err)?;
    writeln!(w, "gap_estimate={:.17e}", result.gap_estimate).map_err(io_err)?;
    writeln!(w, "degenerate={}", result.degenerate).map_err(io_err)?;
    writeln!(w, "amplitudes={}", result.state.amps.len()).map_err(io_err)?;
    writeln!(w).map_err(io_err)?;
    for a in &result.state.amps {
        w.write_all(&a.re.to_le_bytes()).map_err(io_err)?;
        w.write_all(&a.im.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

/// Reads back a dump written by [`write_state_dump`]; returns the chain
/// length, energy and state.
pub fn read_state_dump<R: Read>(r: R, path_for_err: &str) -> Result<(u32, f64, StateVector)> {
    let io_err = |source| Error::Io {
        path: path_for_err.to_string(),
        source,
    };
    let mut reader = std::io::BufReader::new(r);
    let mut n: Option<u32> = None;
    let mut energy: Option<f64> = None;
    let mut count: Option<usize> = None;
    loop {
        let mut line = String::new();
        let read = reader.read_line(&mut line).map_err(io_err)?;
        if read == 0 {
            return Err(Error::input("truncated state dump header"));
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(v) = line.strip_prefix("n=") {
            n = v.parse().ok();
        } else if let Some(v) = line.strip_prefix("energy=") {
            energy = v.parse().ok();
        } else if let Some(v) = line.strip_prefix("amplitudes=") {
            count = v.parse().ok();
        }
    }
    let (n, energy, count) = match (n, energy, count) {
        (Some(n), Some(e), Some(c)) => (n, e, c),
        _ => return Err(Error::input("incomplete state dump header")),
    };
    let mut buf = vec![0u8; count * 16];
    reader.read_exact(&mut buf).map_err(io_err)?;
    let amps: Vec<Complex64> = buf
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((n, energy, StateVector::from_amplitudes(n, amps)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{stabilizer, symmetry_generator, SopKind, Sublattice};

    fn params(j1: f64, j2: f64, h1: f64, h2: f64, n: u32) -> HamiltonianParams {
        HamiltonianParams::new(j1, j2, h1, h2, n).unwrap()
    }

    /// Dense Hamiltonian for small chains; the eigensolver oracle.
    fn dense_h(p: &HamiltonianParams) -> DMatrix<f64> {
        let dim = 1usize << p.n;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for col in 0..dim {
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            v[col] = Complex64::new(1.0, 0.0);
            let sv = StateVector::from_amplitudes(p.n, v).unwrap();
            let hv = apply_hamiltonian(p, &sv).unwrap();
            for row in 0..dim {
                m[(row, col)] = hv.amplitudes()[row].re;
            }
        }
        m
    }

    #[test]
    fn plus_state_is_field_eigenstate() {
        let p = params(0.0, 0.0, 1.0, 0.0, 7);
        // N=7 here; the listed example with N=5 is below the chain-length
        // floor, so the same identity is checked at the smallest legal size.
        let v = StateVector::plus_state(7);
        let hv = apply_hamiltonian(&p, &v).unwrap();
        for (a, b) in hv.amplitudes().iter().zip(v.amplitudes()) {
            assert!((a + 7.0 * b).norm() < 1e-12);
        }
    }

    #[test]
    fn cluster_state_is_stabilizer_eigenstate() {
        let p = params(1.0, 0.0, 0.0, 0.0, 7);
        let cluster = crate::circuits::cluster_state(SopKind::Zxz, 7);
        let hv = apply_hamiltonian(&p, &cluster).unwrap();
        // N-2 = 5 stabilizers, eigenvalue -5.
        for (a, b) in hv.amplitudes().iter().zip(cluster.amplitudes()) {
            assert!((a + 5.0 * b).norm() < 1e-12);
        }
    }

    #[test]
    fn hermiticity_on_random_states() {
        let p = params(0.9, 0.4, 0.3, 0.2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 1 << 9;
        let mk = |rng: &mut ChaCha8Rng| {
            let amps = (0..dim)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut s = StateVector::from_amplitudes(9, amps).unwrap();
            s.normalize();
            s
        };
        let u = mk(&mut rng);
        let v = mk(&mut rng);
        let hu = apply_hamiltonian(&p, &u).unwrap();
        let hv = apply_hamiltonian(&p, &v).unwrap();
        let lhs = u.inner(&hv);
        let rhs = v.inner(&hu).conj();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn symmetry_generators_commute_with_h() {
        let p = params(0.8, 0.5, 0.4, 0.3, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let amps = (0..1 << 9)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut v = StateVector::from_amplitudes(9, amps).unwrap();
        v.normalize();
        for which in [Sublattice::Even, Sublattice::Odd] {
            let g = symmetry_generator(which, 9);
            let gv = crate::circuits::apply_pauli(&g, &v);
            let h_gv = apply_hamiltonian(&p, &gv).unwrap();
            let hv = apply_hamiltonian(&p, &v).unwrap();
            let g_hv = crate::circuits::apply_pauli(&g, &hv);
            for (a, b) in h_gv.amplitudes().iter().zip(g_hv.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cluster_point_ground_state() {
        let p = params(1.0, 0.0, 0.0, 0.0, 9);
        let g = ground_state(&p, 1e-10).unwrap();
        assert!((g.energy + 7.0).abs() < 1e-8);
        assert!(g.residual < 1e-10);
        assert!(g.degenerate, "edge modes make the cluster point 4-fold");
        for j in 2..=8 {
            let c = stabilizer(SopKind::Zxz, j, 9).unwrap();
            assert!((expectation(&c, &g.state).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zxxxz_point_ground_state() {
        let p = params(0.0, 1.0, 0.0, 0.0, 9);
        let g = ground_state(&p, 1e-10).unwrap();
        assert!((g.energy + 5.0).abs() < 1e-8);
        for j in 3..=7 {
            let d = stabilizer(SopKind::Zxxxz, j, 9).unwrap();
            assert!((expectation(&d, &g.state).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn paramagnet_ground_state() {
        let p = params(0.0, 0.0, 1.0, 0.0, 9);
        let g = ground_state(&p, 1e-10).unwrap();
        assert!((g.energy + 9.0).abs() < 1e-8);
        assert!(!g.degenerate);
        assert!((g.gap_estimate - 2.0).abs() < 1e-6);
        for j in 1..=9 {
            let x = PauliString::x(j);
            assert!((expectation(&x, &g.state).unwrap() - 1.0).abs() < 1e-8);
        }
        let z = PauliString::z(5);
        assert!(expectation(&z, &g.state).unwrap().abs() < 1e-8);
    }

    #[test]
    fn lanczos_matches_dense_oracle() {
        for p in [
            params(1.0, 0.0, 0.5, 0.3, 9),
            params(0.7, 0.4, 0.2, 0.1, 9),
            params(1.0, 0.0, 0.5, 0.3, 7),
            params(0.3, 1.0, 0.0, 0.1, 7),
        ] {
            let g = ground_state(&p, 1e-10).unwrap();
            let eig = SymmetricEigen::new(dense_h(&p));
            let e0 = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                (g.energy - e0).abs() < 1e-8,
                "params {p:?}: {} vs {e0}",
                g.energy
            );
        }
    }

    #[test]
    fn ritz_values_never_increase() {
        let p = params(1.0, 0.0, 0.5, 0.3, 9);
        let hist = ritz_history(&p, LanczosOptions::default()).unwrap();
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "Ritz went up: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = params(1.0, 0.2, 0.5, 0.3, 9);
        let opts = LanczosOptions {
            tol: 1e-10,
            max_krylov: 3,
            restarts: 0,
            ..LanczosOptions::default()
        };
        match ground_state_with(&p, opts) {
            Err(Error::NonConvergence(_)) => {}
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let mut p = PauliString::x(1);
        p.mul_phase(1);
        let v = StateVector::plus_state(7);
        assert!(expectation(&p, &v).is_err());
    }

    #[test]
    fn expectation_examples() {
        let v = StateVector::plus_state(9);
        assert!((expectation(&PauliString::x(3), &v).unwrap() - 1.0).abs() < 1e-12);
        let cluster = crate::circuits::cluster_state(SopKind::Zxz, 9);
        let s28 = crate::model::sop_pauli(crate::model::SopSpec::new(SopKind::Zxz, 2, 8).unwrap());
        assert!((expectation(&s28, &cluster).unwrap() - 1.0).abs() < 1e-10);
        assert!(expectation(&PauliString::z(5), &cluster).unwrap().abs() < 1e-10);
    }

    #[test]
    fn curvature_zero_on_constant_hamiltonian() {
        // Sweeping a coupling whose terms are absent: J2 axis with J2-only
        // grid of zeros width? Instead sweep h2 on a grid where h2 stays 0
        // by scanning a zero-amplitude range is ill-posed; use a constant
        // Hamiltonian by sweeping J2 over identical values.
        let base = params(1.0, 0.0, 0.4, 0.0, 7);
        let grid: Vec<f64> = (0..5).map(|i| 0.3 + 0.1 * i as f64).collect();
        // Sweep h1 but with J1=J2=h2=0 and h1 grid: E0 = -N*h1 is linear, so
        // curvature vanishes identically.
        let flat = params(0.0, 0.0, 0.5, 0.0, 7);
        let pts = curvature_scan(&flat, CouplingAxis::H1, &grid, 1e-8).unwrap();
        for p in &pts[1..4] {
            assert!(p.curvature.unwrap().abs() < 1e-5, "{:?}", p);
        }
        // And the scan runs on a generic base without error.
        let _ = curvature_scan(&base, CouplingAxis::H2, &grid, 1e-8).unwrap();
    }

    #[test]
    fn curvature_grid_validation() {
        let base = params(1.0, 0.0, 0.5, 0.0, 7);
        assert!(curvature_scan(&base, CouplingAxis::H1, &[0.1, 0.2], 1e-8).is_err());
        assert!(curvature_scan(&base, CouplingAxis::H1, &[0.1, 0.2, 0.4, 0.5, 0.6], 1e-8).is_err());
    }

    #[test]
    fn state_dump_round_trip() {
        let p = params(1.0, 0.0, 0.5, 0.2, 7);
        let g = ground_state(&p, 1e-10).unwrap();
        let mut buf = Vec::new();
        write_state_dump(&mut buf, &p, &g, "mem").unwrap();
        let (n, energy, state) = read_state_dump(&buf[..], "mem").unwrap();
        assert_eq!(n, 7);
        assert_eq!(energy, g.energy);
        assert!(state.fidelity(&g.state) > 1.0 - 1e-14);
    }
}

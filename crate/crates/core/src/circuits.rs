//! Gate-level construction of the disentangling and QEC unitaries,
//! statevector application, X-basis sampling, and the permutation
//! extraction oracle behind the classical decoder.
//!
//! Gate layouts are fixed once here and validated exclusively through the
//! disentangler conjugation identities and the X-basis permutation
//! condition, so a mis-transcribed circuit surfaces as a test failure
//! rather than silent decoder corruption.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::bits::BitString;
use crate::groundstate::StateVector;
use crate::model::{Pauli, PauliString, SopKind};
use crate::{Error, Result};

/// Circuit gates. Controls subscripted `x`/`y` act in the X/Y eigenbasis;
/// they fire on the -1 eigenstate, like a computational control fires
/// on |1>.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    /// Controlled Z between computational-basis qubits (symmetric).
    Cz(u32, u32),
    /// Controlled Y with control in the Y basis (symmetric).
    CyY(u32, u32),
    Z(u32),
    H(u32),
    /// X-basis-controlled Z: flips the target's X-basis label.
    CxZ { c: u32, t: u32 },
    CxCxZ { c1: u32, c2: u32, t: u32 },
    /// X-basis-controlled NOT: pure sign on X-basis labels.
    CxCxNot { c1: u32, c2: u32, t: u32 },
    /// X-basis-controlled Y: flips the target's X-basis label with an
    /// imaginary branch phase.
    CxY { c: u32, t: u32 },
    CxCxY { c1: u32, c2: u32, t: u32 },
    Swap(u32, u32),
}

impl Gate {
    pub fn operands(&self) -> Vec<u32> {
        match *self {
            Gate::Cz(a, b) | Gate::CyY(a, b) | Gate::Swap(a, b) => vec![a, b],
            Gate::Z(a) | Gate::H(a) => vec![a],
            Gate::CxZ { c, t } | Gate::CxY { c, t } => vec![c, t],
            Gate::CxCxZ { c1, c2, t } | Gate::CxCxNot { c1, c2, t } | Gate::CxCxY { c1, c2, t } => {
                vec![c1, c2, t]
            }
        }
    }

    fn valid(&self) -> bool {
        let ops = self.operands();
        let distinct = (1..ops.len()).all(|i| !ops[..i].contains(&ops[i]));
        distinct && ops.iter().all(|&s| s >= 1)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Cz(a, b) => write!(f, "CZ {a} {b}"),
            Gate::CyY(a, b) => write!(f, "CYY {a} {b}"),
            Gate::Z(a) => write!(f, "Z {a}"),
            Gate::H(a) => write!(f, "H {a}"),
            Gate::CxZ { c, t } => write!(f, "CXZ {c} {t}"),
            Gate::CxCxZ { c1, c2, t } => write!(f, "CXCXZ {c1} {c2} {t}"),
            Gate::CxCxNot { c1, c2, t } => write!(f, "CXCXNOT {c1} {c2} {t}"),
            Gate::CxY { c, t } => write!(f, "CXY {c} {t}"),
            Gate::CxCxY { c1, c2, t } => write!(f, "CXCXY {c1} {c2} {t}"),
            Gate::Swap(a, b) => write!(f, "SWAP {a} {b}"),
        }
    }
}

/// Ordered list of gates; applied first-to-last. Every supported gate is an
/// involution, so the inverse circuit is simply the reversed list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GateList(Vec<Gate>);

impl GateList {
    pub fn new(gates: Vec<Gate>) -> Self {
        debug_assert!(gates.iter().all(Gate::valid));
        GateList(gates)
    }

    pub fn gates(&self) -> &[Gate] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, g: Gate) {
        debug_assert!(g.valid());
        self.0.push(g);
    }

    pub fn extend(&mut self, other: &GateList) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn reversed(&self) -> GateList {
        GateList(self.0.iter().rev().copied().collect())
    }

    /// All touched sites, sorted and deduplicated (the gate light cone).
    pub fn light_cone(&self) -> Vec<u32> {
        let mut sites: Vec<u32> = self.0.iter().flat_map(|g| g.operands()).collect();
        sites.sort_unstable();
        sites.dedup();
        sites
    }

    /// Drops gates with any operand outside `[1, n]` (open-boundary
    /// truncation).
    pub fn truncated(&self, n: u32) -> GateList {
        GateList(
            self.0
                .iter()
                .filter(|g| g.operands().iter().all(|&s| s >= 1 && s <= n))
                .copied()
                .collect(),
        )
    }
}

impl fmt::Display for GateList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.0 {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for GateList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut gates = Vec::new();
        for (ln, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let kind = it.next().unwrap();
            let args: Vec<u32> = it
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::input(format!("line {}: bad operand {t}", ln + 1)))
                })
                .collect::<Result<_>>()?;
            let bad = || Error::input(format!("line {}: bad gate: {line}", ln + 1));
            let gate = match (kind, args.as_slice()) {
                ("CZ", &[a, b]) => Gate::Cz(a, b),
                ("CYY", &[a, b]) => Gate::CyY(a, b),
                ("Z", &[a]) => Gate::Z(a),
                ("H", &[a]) => Gate::H(a),
                ("CXZ", &[c, t]) => Gate::CxZ { c, t },
                ("CXCXZ", &[c1, c2, t]) => Gate::CxCxZ { c1, c2, t },
                ("CXCXNOT", &[c1, c2, t]) => Gate::CxCxNot { c1, c2, t },
                ("CXY", &[c, t]) => Gate::CxY { c, t },
                ("CXCXY", &[c1, c2, t]) => Gate::CxCxY { c1, c2, t },
                ("SWAP", &[a, b]) => Gate::Swap(a, b),
                _ => return Err(bad()),
            };
            if !gate.valid() {
                return Err(bad());
            }
            gates.push(gate);
        }
        Ok(GateList(gates))
    }
}

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let na = (a.len() as f64).sqrt() as usize;
    let nb = (b.len() as f64).sqrt() as usize;
    let n = na * nb;
    let mut out = vec![C0; n * n];
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[(i * nb + k) * n + (j * nb + l)] = a[i * na + j] * b[k * nb + l];
                }
            }
        }
    }
    out
}

fn mat2(rows: [[Complex64; 2]; 2]) -> Vec<Complex64> {
    rows.concat()
}

fn pauli_mat(p: Pauli) -> Vec<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    match p {
        Pauli::X => mat2([[C0, C1], [C1, C0]]),
        Pauli::Y => mat2([[C0, -i], [i, C0]]),
        Pauli::Z => mat2([[C1, C0], [C0, -C1]]),
    }
}

fn eye(n: usize) -> Vec<Complex64> {
    let mut m = vec![C0; n * n];
    for i in 0..n {
        m[i * n + i] = C1;
    }
    m
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// -1-eigenstate projector of a Pauli letter.
fn minus_proj(p: Pauli) -> Vec<Complex64> {
    let m = pauli_mat(p);
    let id = eye(2);
    sub(&id, &m).iter().map(|x| x * 0.5).collect()
}

/// Dense matrix of a gate in the order of its operand list.
fn gate_matrix(g: &Gate) -> Vec<Complex64> {
    let px = minus_proj(Pauli::X);
    match g {
        Gate::Z(_) => pauli_mat(Pauli::Z),
        Gate::H(_) => {
            let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            mat2([[s, s], [s, -s]])
        }
        Gate::Cz(_, _) => {
            let pz = minus_proj(Pauli::Z);
            let flip = sub(&eye(2), &pauli_mat(Pauli::Z));
            sub(&eye(4), &kron(&pz, &flip))
        }
        Gate::CyY(_, _) => {
            let py = minus_proj(Pauli::Y);
            let two_pp = kron(&py, &py).iter().map(|x| x * 2.0).collect::<Vec<_>>();
            sub(&eye(4), &two_pp)
        }
        Gate::CxZ { .. } => sub(&eye(4), &kron(&px, &sub(&eye(2), &pauli_mat(Pauli::Z)))),
        Gate::CxY { .. } => sub(&eye(4), &kron(&px, &sub(&eye(2), &pauli_mat(Pauli::Y)))),
        Gate::CxCxZ { .. } => {
            let pp = kron(&px, &px);
            sub(&eye(8), &kron(&pp, &sub(&eye(2), &pauli_mat(Pauli::Z))))
        }
        Gate::CxCxNot { .. } => {
            let pp = kron(&px, &px);
            sub(&eye(8), &kron(&pp, &sub(&eye(2), &pauli_mat(Pauli::X))))
        }
        Gate::CxCxY { .. } => {
            let pp = kron(&px, &px);
            sub(&eye(8), &kron(&pp, &sub(&eye(2), &pauli_mat(Pauli::Y))))
        }
        Gate::Swap(_, _) => {
            let mut m = vec![C0; 16];
            for (a, b) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
                m[a * 4 + b] = C1;
            }
            m
        }
    }
}

/// Applies a k-qubit dense matrix (k <= 3) to the given sites in place.
fn apply_dense(state: &mut StateVector, sites: &[u32], mat: &[Complex64]) {
    let k = sites.len();
    let dk = 1usize << k;
    debug_assert_eq!(mat.len(), dk * dk);
    let n = state.n();
    let masks: Vec<usize> = sites.iter().map(|&s| 1usize << (n - s)).collect();
    let all: usize = masks.iter().sum();
    let dim = 1usize << n;
    let amps = state.amplitudes_mut();
    let mut gathered = [C0; 8];
    for base in 0..dim {
        if base & all != 0 {
            continue;
        }
        for (pat, g) in gathered.iter_mut().enumerate().take(dk) {
            let mut idx = base;
            for (bit, mask) in masks.iter().enumerate() {
                if (pat >> (k - 1 - bit)) & 1 == 1 {
                    idx |= mask;
                }
            }
            *g = amps[idx];
        }
        for row in 0..dk {
            let mut acc = C0;
            for (col, g) in gathered.iter().enumerate().take(dk) {
                acc += mat[row * dk + col] * g;
            }
            let mut idx = base;
            for (bit, mask) in masks.iter().enumerate() {
                if (row >> (k - 1 - bit)) & 1 == 1 {
                    idx |= mask;
                }
            }
            amps[idx] = acc;
        }
    }
}

/// Exact unitary application of a gate list; norm preserved.
pub fn apply_gates(gates: &GateList, state: &StateVector) -> Result<StateVector> {
    let mut out = state.clone();
    apply_gates_mut(gates, &mut out)?;
    Ok(out)
}

pub fn apply_gates_mut(gates: &GateList, state: &mut StateVector) -> Result<()> {
    let n = state.n();
    for g in gates.gates() {
        let ops = g.operands();
        if ops.iter().any(|&s| s < 1 || s > n) {
            return Err(Error::input(format!("gate {g} outside chain of length {n}")));
        }
        let mat = gate_matrix(g);
        apply_dense(state, &ops, &mat);
    }
    Ok(())
}

/// Applies a signed Pauli string to a state (one Kraus branch).
pub fn apply_pauli(p: &PauliString, state: &StateVector) -> StateVector {
    let n = state.n();
    let mut mx = 0usize;
    let mut m_zy = 0usize;
    let mut base_exp = p.phase_exp() as u32;
    for (site, letter) in p.letters() {
        assert!(site <= n, "operator site {site} beyond chain {n}");
        let mask = 1usize << (n - site);
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
    let amps = state.amplitudes();
    let phases = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    let out = (0..amps.len())
        .map(|b| {
            let src = b ^ mx;
            let exp = (base_exp + 2 * (src & m_zy).count_ones()) % 4;
            phases[exp as usize] * amps[src]
        })
        .collect();
    StateVector::from_amplitudes(n, out).unwrap()
}

/// In-place Walsh-Hadamard transform over all qubits (maps computational
/// amplitudes to X-basis amplitudes and back; self-inverse).
pub fn hadamard_all(state: &mut StateVector) {
    let n = state.n();
    let amps = state.amplitudes_mut();
    let norm = std::f64::consts::FRAC_1_SQRT_2;
    for q in 0..n {
        let mask = 1usize << q;
        for b in 0..amps.len() {
            if b & mask == 0 {
                let (lo, hi) = (amps[b], amps[b | mask]);
                amps[b] = (lo + hi) * norm;
                amps[b | mask] = (lo - hi) * norm;
            }
        }
    }
}

/// Probability of each X-basis outcome; index bits follow the site order
/// with bit value 1 meaning `X_j = -1`.
pub fn x_basis_distribution(state: &StateVector) -> Vec<f64> {
    let mut s = state.clone();
    hadamard_all(&mut s);
    s.amplitudes().iter().map(|a| a.norm_sqr()).collect()
}

/// Samples X-basis measurement outcomes of all qubits.
pub fn sample_x_basis(state: &StateVector, shots: usize, rng: &mut impl Rng) -> Vec<BitString> {
    let probs = x_basis_distribution(state);
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cum.push(acc);
    }
    let n = state.n();
    (0..shots)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * acc;
            let idx = cum.partition_point(|&c| c < u).min(probs.len() - 1);
            BitString::from_basis_index(idx, n)
        })
        .collect()
}

/// Disentangler `U_N^dagger` mapping the matching cluster state to
/// `|+>^{(x)N}`.
///
/// ZXZ: one layer of CZ gates between neighbouring qubits. ZXXXZ: the CZ
/// layer, a layer of Y-basis controlled-Y gates between neighbours, and a
/// layer of Z gates.
pub fn disentangler(kind: SopKind, n: u32) -> GateList {
    assert!(n >= 3);
    let mut gates = Vec::new();
    for j in 1..n {
        gates.push(Gate::Cz(j, j + 1));
    }
    if kind == SopKind::Zxxxz {
        for j in 1..n {
            gates.push(Gate::CyY(j, j + 1));
        }
        for j in 1..=n {
            gates.push(Gate::Z(j));
        }
    }
    GateList::new(gates)
}

/// Entangler `U_N`: the reversed disentangler (all gates are involutions).
pub fn entangler(kind: SopKind, n: u32) -> GateList {
    disentangler(kind, n).reversed()
}

/// The cluster state of the given kind: entangler applied to `|+>^{(x)N}`.
pub fn cluster_state(kind: SopKind, n: u32) -> StateVector {
    let mut s = StateVector::plus_state(n);
    apply_gates_mut(&entangler(kind, n), &mut s).unwrap();
    s
}

/// Classical correction layer kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QecLayer {
    /// Corrects X-type perturbations of the cluster state.
    XCorr,
    /// Majority vote removing isolated symmetry-breaking syndromes.
    ZCorr,
    /// Corrects three-site stabilizer perturbations of the other phase
    /// (ZXXXZ pipeline only).
    CCorr,
}

/// The tilde-transformed QEC unitary acting between X-basis measurements,
/// for the window centred at `center` of layer `f` (offsets scale with
/// `3^{f-1}`).
///
/// All gates are controlled in the X basis and target a Pauli Z or Y, so
/// each unitary maps X-basis states onto X-basis states up to phase.
pub fn qec_unitary(phase: SopKind, layer: QecLayer, f: u32, center: u32) -> Result<GateList> {
    if f < 1 {
        return Err(Error::input("layer index f starts at 1"));
    }
    let s = 3u32.pow(f - 1) as i64;
    let c = center as i64;
    let site = |off: i64| -> Result<u32> {
        let v = c + off * s;
        if v < 1 {
            return Err(Error::input(format!(
                "window at centre {center}, scale {s} leaves the chain"
            )));
        }
        Ok(v as u32)
    };
    let gates = match (phase, layer) {
        (_, QecLayer::ZCorr) => {
            // Reversible majority: fold both neighbours onto the centre
            // after copying the centre out, M(u, c, v) on the survivor.
            vec![
                Gate::CxZ {
                    c: site(0)?,
                    t: site(-7)?,
                },
                Gate::CxZ {
                    c: site(0)?,
                    t: site(7)?,
                },
                Gate::CxCxZ {
                    c1: site(-7)?,
                    c2: site(7)?,
                    t: site(0)?,
                },
            ]
        }
        (SopKind::Zxz, QecLayer::XCorr) => vec![
            Gate::CxZ {
                c: site(-2)?,
                t: site(0)?,
            },
            Gate::CxZ {
                c: site(2)?,
                t: site(0)?,
            },
            Gate::CxCxZ {
                c1: site(-4)?,
                c2: site(-2)?,
                t: site(0)?,
            },
            Gate::CxCxZ {
                c1: site(2)?,
                c2: site(4)?,
                t: site(0)?,
            },
        ],
        (SopKind::Zxxxz, QecLayer::XCorr) => vec![
            Gate::CxY {
                c: site(-4)?,
                t: site(0)?,
            },
            Gate::CxY {
                c: site(4)?,
                t: site(0)?,
            },
            Gate::CxCxY {
                c1: site(-8)?,
                c2: site(-4)?,
                t: site(0)?,
            },
            Gate::CxCxY {
                c1: site(8)?,
                c2: site(4)?,
                t: site(0)?,
            },
        ],
        (SopKind::Zxxxz, QecLayer::CCorr) => vec![
            Gate::CxY {
                c: site(-2)?,
                t: site(0)?,
            },
            Gate::CxY {
                c: site(2)?,
                t: site(0)?,
            },
            Gate::CxCxY {
                c1: site(-4)?,
                c2: site(-2)?,
                t: site(0)?,
            },
            Gate::CxCxY {
                c1: site(4)?,
                c2: site(2)?,
                t: site(0)?,
            },
        ],
        (SopKind::Zxz, QecLayer::CCorr) => {
            return Err(Error::input(
                "C-error correction belongs to the ZXXXZ pipeline",
            ));
        }
    };
    Ok(GateList::new(gates))
}

/// Full correcting layer `f` on a chain of `n` sites: window unitaries at
/// every surviving position, with gates leaving `[1, n]` dropped.
pub fn qec_layer_full(phase: SopKind, layer: QecLayer, f: u32, n: u32) -> Result<GateList> {
    let c = n.div_ceil(2);
    let step = 3i64.pow(f);
    let mut all = GateList::default();
    let mut p = c as i64 % step;
    if p <= 0 {
        p += step;
    }
    while p <= n as i64 {
        // Build the window without boundary validation, then truncate.
        let centered = qec_unitary_unchecked(phase, layer, f, p);
        all.extend(&centered.truncated(n));
        p += step;
    }
    Ok(all)
}

/// Like [`qec_unitary`] but emits signed offsets directly, dropping gates
/// whose operands would leave the positive axis.
fn qec_unitary_unchecked(phase: SopKind, layer: QecLayer, f: u32, center: i64) -> GateList {
    let s = 3i64.pow(f - 1);
    let offsets: &[(i64, i64, Option<i64>)] = match (phase, layer) {
        (_, QecLayer::ZCorr) => &[(0, -7, None), (0, 7, None), (-7, 0, Some(7))],
        (SopKind::Zxz, QecLayer::XCorr) => {
            &[(-2, 0, None), (2, 0, None), (-4, 0, Some(-2)), (4, 0, Some(2))]
        }
        (SopKind::Zxxxz, QecLayer::XCorr) => {
            &[(-4, 0, None), (4, 0, None), (-8, 0, Some(-4)), (8, 0, Some(4))]
        }
        (SopKind::Zxxxz, QecLayer::CCorr) => {
            &[(-2, 0, None), (2, 0, None), (-4, 0, Some(-2)), (4, 0, Some(2))]
        }
        (SopKind::Zxz, QecLayer::CCorr) => unreachable!("rejected by qec_unitary"),
    };
    let y_target = matches!(
        (phase, layer),
        (SopKind::Zxxxz, QecLayer::XCorr) | (SopKind::Zxxxz, QecLayer::CCorr)
    );
    let mut gates = Vec::new();
    for &(o1, o2, o3) in offsets {
        let s1 = center + o1 * s;
        let s2 = center + o2 * s;
        let s3 = o3.map(|o| center + o * s);
        if s1 < 1 || s2 < 1 || s3.is_some_and(|v| v < 1) {
            continue;
        }
        let gate = match (s3, y_target, layer) {
            (None, _, QecLayer::ZCorr) => Gate::CxZ {
                c: s1 as u32,
                t: s2 as u32,
            },
            (Some(v), _, QecLayer::ZCorr) => Gate::CxCxZ {
                c1: s1 as u32,
                c2: v as u32,
                t: s2 as u32,
            },
            (None, false, _) => Gate::CxZ {
                c: s1 as u32,
                t: s2 as u32,
            },
            (None, true, _) => Gate::CxY {
                c: s1 as u32,
                t: s2 as u32,
            },
            (Some(v), false, _) => Gate::CxCxZ {
                c1: s1 as u32,
                c2: v as u32,
                t: s2 as u32,
            },
            (Some(v), true, _) => Gate::CxCxY {
                c1: s1 as u32,
                c2: v as u32,
                t: s2 as u32,
            },
        };
        gates.push(gate);
    }
    GateList::new(gates)
}

/// A unitary restricted to X-basis labels: a bijection on bit patterns
/// together with a fourth-root-of-unity phase per input.
#[derive(Clone, Debug)]
pub struct PermutationAction {
    width: u32,
    table: Vec<u32>,
    phase_exps: Vec<u8>,
}

impl PermutationAction {
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Output label for input label `x` (bit `i` of a label is the window
    /// site at position `i`).
    pub fn map(&self, x: u32) -> u32 {
        self.table[x as usize]
    }

    /// Phase as an exponent of `i`.
    pub fn phase_exp(&self, x: u32) -> u8 {
        self.phase_exps[x as usize]
    }

    pub fn sign(&self, x: u32) -> f64 {
        match self.phase_exps[x as usize] {
            0 => 1.0,
            2 => -1.0,
            e => panic!("imaginary branch phase i^{e}"),
        }
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn is_identity_on(&self, bit: usize) -> bool {
        self.table
            .iter()
            .enumerate()
            .all(|(x, &y)| (x as u32 >> bit) & 1 == (y >> bit) & 1)
    }
}

/// Applies `gates` to every X-basis state of the `window` and verifies the
/// image is a single X-basis state up to a unit phase.
///
/// Window labels use bit `i` for `window[i]`. Errors with a permutation
/// condition violation when any image is not proportional to a basis
/// state, which signals a mis-transcribed circuit.
pub fn extract_permutation(gates: &GateList, window: &[u32]) -> Result<PermutationAction> {
    let w = window.len() as u32;
    if w == 0 || w > 16 {
        return Err(Error::input(format!("window of {w} sites unsupported")));
    }
    let mut sorted = window.to_vec();
    sorted.dedup();
    if sorted.len() != window.len() {
        return Err(Error::input("duplicate window sites"));
    }
    let pos_of = |site: u32| window.iter().position(|&s| s == site);
    // Remap gates onto local qubits 1..=w.
    let mut local = Vec::with_capacity(gates.len());
    for g in gates.gates() {
        let ops = g.operands();
        let mapped: Vec<u32> = ops
            .iter()
            .map(|&s| {
                pos_of(s)
                    .map(|i| i as u32 + 1)
                    .ok_or_else(|| Error::input(format!("gate {g} outside window")))
            })
            .collect::<Result<_>>()?;
        let lg = match (*g, mapped.as_slice()) {
            (Gate::Cz(..), &[a, b]) => Gate::Cz(a, b),
            (Gate::CyY(..), &[a, b]) => Gate::CyY(a, b),
            (Gate::Z(_), &[a]) => Gate::Z(a),
            (Gate::H(_), &[a]) => Gate::H(a),
            (Gate::CxZ { .. }, &[c, t]) => Gate::CxZ { c, t },
            (Gate::CxY { .. }, &[c, t]) => Gate::CxY { c, t },
            (Gate::CxCxZ { .. }, &[c1, c2, t]) => Gate::CxCxZ { c1, c2, t },
            (Gate::CxCxNot { .. }, &[c1, c2, t]) => Gate::CxCxNot { c1, c2, t },
            (Gate::CxCxY { .. }, &[c1, c2, t]) => Gate::CxCxY { c1, c2, t },
            (Gate::Swap(..), &[a, b]) => Gate::Swap(a, b),
            _ => unreachable!(),
        };
        local.push(lg);
    }
    let local = GateList::new(local);

    let dim = 1usize << w;
    let mut table = vec![0u32; dim];
    let mut phase_exps = vec![0u8; dim];
    let mut seen = vec![false; dim];
    let phases = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    for label in 0..dim {
        // Local qubit i+1 carries label bit i; the basis index puts local
        // qubit 1 at the most significant bit.
        let mut idx = 0usize;
        for bit in 0..w {
            if (label >> bit) & 1 == 1 {
                idx |= 1 << (w - 1 - bit);
            }
        }
        let mut s = StateVector::basis_state(w, idx);
        hadamard_all(&mut s);
        apply_gates_mut(&local, &mut s)?;
        hadamard_all(&mut s);
        let mut hit: Option<(usize, Complex64)> = None;
        for (b, a) in s.amplitudes().iter().enumerate() {
            if a.norm() > 1e-10 {
                if hit.is_some() {
                    return Err(Error::CondViolated(format!(
                        "input {label:0w$b} maps to a superposition",
                        w = w as usize
                    )));
                }
                hit = Some((b, *a));
            }
        }
        let (out_idx, amp) = hit.ok_or_else(|| {
            Error::CondViolated(format!("input {label} vanished (norm leak)"))
        })?;
        if (amp.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::CondViolated(format!(
                "input {label} image has norm {}",
                amp.norm()
            )));
        }
        let exp = phases
            .iter()
            .position(|p| (amp - p).norm() < 1e-8)
            .ok_or_else(|| {
                Error::CondViolated(format!("input {label} phase {amp} not a power of i"))
            })?;
        let mut out_label = 0u32;
        for bit in 0..w {
            if (out_idx >> (w - 1 - bit)) & 1 == 1 {
                out_label |= 1 << bit;
            }
        }
        if seen[out_label as usize] {
            return Err(Error::CondViolated(format!(
                "two inputs map to label {out_label}"
            )));
        }
        seen[out_label as usize] = true;
        table[label] = out_label;
        phase_exps[label] = exp as u8;
    }
    Ok(PermutationAction {
        width: w,
        table,
        phase_exps,
    })
}

/// Conjugates a Pauli string through a Clifford gate list: returns
/// `U P U^dagger` where `U` applies the list first-to-last.
///
/// Supported gates: CZ, CyY, Z, H, SWAP. The X-controlled correction gates
/// are not Clifford and are rejected.
pub fn conjugate_through(gates: &GateList, p: &PauliString) -> Result<PauliString> {
    let mut acc = p.clone();
    for g in gates.gates() {
        acc = conjugate_gate(g, &acc)?;
    }
    Ok(acc)
}

fn conjugate_gate(g: &Gate, p: &PauliString) -> Result<PauliString> {
    let mut out = PauliString::identity();
    out.mul_phase(p.phase_exp());
    for (site, letter) in p.letters() {
        let img = conjugate_letter(g, site, letter)?;
        out = &out * &img;
    }
    Ok(out)
}

fn conjugate_letter(g: &Gate, site: u32, letter: Pauli) -> Result<PauliString> {
    let single = PauliString::single(site, letter);
    Ok(match *g {
        Gate::Cz(a, b) => {
            let other = if site == a {
                b
            } else if site == b {
                a
            } else {
                return Ok(single);
            };
            match letter {
                Pauli::Z => single,
                Pauli::X | Pauli::Y => &single * &PauliString::z(other),
            }
        }
        Gate::CyY(a, b) => {
            let other = if site == a {
                b
            } else if site == b {
                a
            } else {
                return Ok(single);
            };
            match letter {
                Pauli::Y => single,
                Pauli::X | Pauli::Z => &single * &PauliString::y(other),
            }
        }
        Gate::Z(a) => {
            let mut s = single;
            if site == a && letter != Pauli::Z {
                s.mul_phase(2);
            }
            s
        }
        Gate::H(a) => {
            if site != a {
                return Ok(single);
            }
            match letter {
                Pauli::X => PauliString::z(a),
                Pauli::Z => PauliString::x(a),
                Pauli::Y => {
                    let mut s = PauliString::y(a);
                    s.mul_phase(2);
                    s
                }
            }
        }
        Gate::Swap(a, b) => {
            if site == a {
                PauliString::single(b, letter)
            } else if site == b {
                PauliString::single(a, letter)
            } else {
                single
            }
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "symbolic conjugation through non-Clifford gate {g}"
            )));
        }
    })
}

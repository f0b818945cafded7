//! Classical post-processing stack: truth-table correction layers, the full
//! Boolean decoding function, the output estimator, and exact fast syndrome
//! samplers for cluster-state (any N) and small exact-state inputs.
//!
//! Syndromes are bit-packed; each layer is a table lookup over a small
//! window per surviving position, with out-of-chain window bits reading as
//! 0 ("no error outside the chain").

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::Rng;

use crate::bits::BitString;
use crate::circuits::{self, QecLayer};
use crate::groundstate::StateVector;
use crate::model::{Pauli, PauliString, SopKind};
use crate::noise::{shot_rng, ChannelSpec};
use crate::{exec, Error, Result};

/// Measured X-basis bit string; bit `j` set means `X_j = -1`.
pub type SyndromeString = BitString;

/// Window offsets plus truth table for one classical correction layer,
/// derived from the corresponding QEC unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderTable {
    pub layer: QecLayer,
    /// Offsets in units of `3^{f-1}`, ascending.
    pub offsets: Vec<i32>,
    width: u32,
    bits: u64,
}

impl DecoderTable {
    /// Hand-built table (tests, identity layers); `bits` packs the truth
    /// table with bit `idx` giving the output for window index `idx`.
    pub fn custom(layer: QecLayer, offsets: Vec<i32>, bits: u64) -> Self {
        let width = offsets.len() as u32;
        assert!(width <= 6);
        DecoderTable {
            layer,
            offsets,
            width,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Truth-table bit for a window index (bit `k` of `idx` is the window
    /// bit at `offsets[k]`).
    #[inline]
    pub fn eval(&self, idx: u32) -> u64 {
        (self.bits >> idx) & 1
    }

    pub fn table_bits(&self) -> u64 {
        self.bits
    }

    /// Audit export: offset list plus hex-encoded table.
    pub fn export_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "layer: {:?}", self.layer);
        let offsets: Vec<String> = self.offsets.iter().map(|o| o.to_string()).collect();
        let _ = writeln!(s, "offsets: {}", offsets.join(" "));
        let digits = (1usize << self.width).div_ceil(4);
        let _ = writeln!(s, "table: {:#0w$x}", self.bits, w = digits + 2);
        s
    }
}

fn derive_table_uncached(phase: SopKind, layer: QecLayer) -> Result<DecoderTable> {
    // Centre 9 keeps every window site positive at f = 1 (widest reach is
    // +-8 for the ZXXXZ X-correcting layer).
    let center = 9u32;
    let gates = circuits::qec_unitary(phase, layer, 1, center)?;
    let window = gates.light_cone();
    let perm = circuits::extract_permutation(&gates, &window)?;
    let centre_pos = window
        .iter()
        .position(|&s| s == center)
        .expect("centre inside its own window");
    let w = window.len();
    let surviving = |x: u32| (perm.map(x) >> centre_pos) & 1;
    // Keep exactly the bits the surviving output depends on.
    let mut dependent = Vec::new();
    for bit in 0..w {
        let depends = (0..1u32 << w).any(|x| surviving(x) != surviving(x ^ (1 << bit)));
        if depends {
            dependent.push(bit);
        }
    }
    let dw = dependent.len();
    if dw > 6 {
        return Err(Error::input(format!(
            "window of {dw} dependent bits exceeds the packed-table width"
        )));
    }
    let mut bits = 0u64;
    for idx in 0..1u32 << dw {
        // Spread the compact index over the full window, independent bits 0.
        let mut x = 0u32;
        for (k, &bit) in dependent.iter().enumerate() {
            if (idx >> k) & 1 == 1 {
                x |= 1 << bit;
            }
        }
        if surviving(x) == 1 {
            bits |= 1 << idx;
        }
    }
    // Consistency: independent bits really are independent.
    for x in 0..1u32 << w {
        let mut idx = 0u32;
        for (k, &bit) in dependent.iter().enumerate() {
            idx |= ((x >> bit) & 1) << k;
        }
        if surviving(x) as u64 != (bits >> idx) & 1 {
            return Err(Error::CondViolated(
                "surviving bit depends on a bit outside its window".into(),
            ));
        }
    }
    if bits & 1 != 0 {
        return Err(Error::CondViolated(
            "noise-free input does not map to the noise-free output".into(),
        ));
    }
    let offsets = dependent
        .iter()
        .map(|&i| window[i] as i32 - center as i32)
        .collect();
    Ok(DecoderTable {
        layer,
        offsets,
        width: dw as u32,
        bits,
    })
}

type TableKey = (SopKind, QecLayer);

fn table_cache() -> &'static HashMap<TableKey, std::result::Result<DecoderTable, String>> {
    static CACHE: OnceLock<HashMap<TableKey, std::result::Result<DecoderTable, String>>> =
        OnceLock::new();
    CACHE.get_or_init(|| {
        let mut map = HashMap::new();
        for phase in [SopKind::Zxz, SopKind::Zxxxz] {
            for layer in [QecLayer::XCorr, QecLayer::ZCorr, QecLayer::CCorr] {
                if phase == SopKind::Zxz && layer == QecLayer::CCorr {
                    continue;
                }
                map.insert(
                    (phase, layer),
                    derive_table_uncached(phase, layer).map_err(|e| e.to_string()),
                );
            }
        }
        map
    })
}

/// Truth table for one correction layer, extracted once from the QEC
/// unitary and cached. Offsets are reused at every depth by scaling with
/// `3^{f-1}`.
pub fn derive_table(phase: SopKind, layer: QecLayer) -> Result<&'static DecoderTable> {
    match table_cache().get(&(phase, layer)) {
        Some(Ok(t)) => Ok(t),
        Some(Err(msg)) => Err(Error::CondViolated(msg.clone())),
        None => Err(Error::input(format!(
            "no correction layer {layer:?} in the {phase:?} pipeline"
        ))),
    }
}

/// Target phase recognized by an architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseTarget {
    /// ZXZ phase against topologically trivial phases (and against ZXXXZ,
    /// whose stabilizers produce X-like syndromes).
    Zxz,
    /// ZXXXZ phase against topologically trivial phases.
    Zxxxz,
    /// ZXXXZ phase against the ZXZ phase (C-error correcting layers).
    ZxxxzVsZxz,
}

/// Disentangler kind plus the per-depth sequence of correction layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub target: PhaseTarget,
    pub disentangler: SopKind,
    pub layers: Vec<QecLayer>,
}

impl Architecture {
    /// Alternating X- and Z-error correcting layers (odd f corrects X).
    pub fn alternating(kind: SopKind, depth: u32) -> Self {
        let layers = (1..=depth)
            .map(|f| {
                if f % 2 == 1 {
                    QecLayer::XCorr
                } else {
                    QecLayer::ZCorr
                }
            })
            .collect();
        Architecture {
            target: match kind {
                SopKind::Zxz => PhaseTarget::Zxz,
                SopKind::Zxxxz => PhaseTarget::Zxxxz,
            },
            disentangler: kind,
            layers,
        }
    }

    /// The original all-X-correcting stack.
    pub fn x_only(kind: SopKind, depth: u32) -> Self {
        Architecture {
            target: match kind {
                SopKind::Zxz => PhaseTarget::Zxz,
                SopKind::Zxxxz => PhaseTarget::Zxxxz,
            },
            disentangler: kind,
            layers: vec![QecLayer::XCorr; depth as usize],
        }
    }

    /// Alternating C- and Z-error correcting layers on the ZXXXZ
    /// disentangler: recognizes ZXXXZ against ZXZ.
    pub fn alternating_c(depth: u32) -> Self {
        let layers = (1..=depth)
            .map(|f| {
                if f % 2 == 1 {
                    QecLayer::CCorr
                } else {
                    QecLayer::ZCorr
                }
            })
            .collect();
        Architecture {
            target: PhaseTarget::ZxxxzVsZxz,
            disentangler: SopKind::Zxxxz,
            layers,
        }
    }

    pub fn depth(&self) -> u32 {
        self.layers.len() as u32
    }

    /// Number of output bits `m = floor(N / 3^d)`.
    pub fn output_count(&self, n: u32) -> u32 {
        n / 3u32.pow(self.depth())
    }

    pub fn validate(&self, n: u32) -> Result<()> {
        let d = self.depth();
        if d == 0 {
            return Err(Error::input("architecture needs at least one layer"));
        }
        if 3u64.pow(d) > n as u64 {
            return Err(Error::input(format!(
                "depth {d} exceeds floor(log3 {n})"
            )));
        }
        let m = self.output_count(n);
        if m.is_multiple_of(2) {
            return Err(Error::input(format!(
                "output count m = {m} must be odd (N = {n}, depth {d})"
            )));
        }
        for layer in &self.layers {
            derive_table(self.disentangler, *layer)?;
        }
        Ok(())
    }

    /// Output positions `c + j 3^d` for symmetric `j`, `c = (N+1)/2`.
    pub fn output_positions(&self, n: u32) -> Vec<u32> {
        let c = n.div_ceil(2);
        let step = 3i64.pow(self.depth());
        let m = self.output_count(n) as i64;
        ((-(m - 1) / 2)..=(m - 1) / 2)
            .map(|j| (c as i64 + j * step) as u32)
            .collect()
    }
}

/// Applies one correction layer: input bits on the sublattice
/// `p = c (mod 3^{f-1})`, output bits on `p = c (mod 3^f)`. Window bits
/// outside `[1, N]` read as 0.
pub fn decode_layer(bits: &SyndromeString, table: &DecoderTable, f: u32, center: u32) -> SyndromeString {
    let n = bits.len();
    let scale = 3i64.pow(f - 1);
    let step = 3i64.pow(f);
    let mut out = SyndromeString::zeros(n);
    let mut p = center as i64 % step;
    if p <= 0 {
        p += step;
    }
    while p <= n as i64 {
        let mut idx = 0u32;
        for (k, &off) in table.offsets.iter().enumerate() {
            idx |= (bits.get_padded(p + off as i64 * scale) as u32) << k;
        }
        if table.eval(idx) == 1 {
            out.set(p as u32, true);
        }
        p += step;
    }
    out
}

/// Full Boolean decoding function: sequential layers `f = 1..d`, returning
/// the `m` output bits at the symmetric positions around the centre.
pub fn decode(x: &SyndromeString, arch: &Architecture) -> Result<Vec<bool>> {
    let n = x.len();
    arch.validate(n)?;
    let state = decode_to_layer(x, arch, arch.depth())?;
    Ok(arch
        .output_positions(n)
        .iter()
        .map(|&p| state.get(p))
        .collect())
}

/// Runs the first `upto` layers and returns the resulting sublattice bits.
pub fn decode_to_layer(x: &SyndromeString, arch: &Architecture, upto: u32) -> Result<SyndromeString> {
    let n = x.len();
    let center = n.div_ceil(2);
    let mut state = x.clone();
    for f in 1..=upto {
        let table = derive_table(arch.disentangler, arch.layers[f as usize - 1])?;
        state = decode_layer(&state, table, f, center);
    }
    Ok(state)
}

/// Fraction of set bits on the surviving sublattice after layer `f`.
pub fn sublattice_density(state: &SyndromeString, f: u32, center: u32) -> f64 {
    bulk_sublattice_density(state, f, center, 0)
}

/// Sublattice density restricted to positions at least `margin` sites from
/// both chain ends; with the margin set to the decoding light-cone radius
/// this estimates the boundary-free density.
pub fn bulk_sublattice_density(state: &SyndromeString, f: u32, center: u32, margin: u32) -> f64 {
    let n = state.len();
    let step = 3i64.pow(f);
    let mut p = center as i64 % step;
    if p <= 0 {
        p += step;
    }
    let lo = margin as i64 + 1;
    let hi = n as i64 - margin as i64;
    let mut ones = 0usize;
    let mut total = 0usize;
    while p <= n as i64 {
        if p >= lo && p <= hi {
            total += 1;
            ones += state.get(p as u32) as usize;
        }
        p += step;
    }
    ones as f64 / total.max(1) as f64
}

/// Radius of the input light cone of an output bit after the first `upto`
/// layers of an architecture.
pub fn light_cone_radius(arch: &Architecture, upto: u32) -> Result<u32> {
    let mut r: i64 = 0;
    for f in 1..=upto {
        let table = derive_table(arch.disentangler, arch.layers[f as usize - 1])?;
        let reach = table.offsets.iter().map(|o| o.abs() as i64).max().unwrap_or(0);
        r += reach * 3i64.pow(f - 1);
    }
    Ok(r as u32)
}

/// QCNN output estimate from measured bit strings: mean and standard error
/// of `(1 - 2 G(x)_pos)` over samples and output positions.
pub fn qcnn_output(samples: &[SyndromeString], arch: &Architecture) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::input("need at least one sample"));
    }
    let per_shot: Vec<f64> = samples
        .iter()
        .map(|x| {
            let outs = decode(x, arch)?;
            let m = outs.len() as f64;
            Ok(outs.iter().map(|&b| 1.0 - 2.0 * (b as u8) as f64).sum::<f64>() / m)
        })
        .collect::<Result<_>>()?;
    Ok(exec::mean_stderr(&per_shot))
}

/// Measurement bits flipped by a single error at `j` after the
/// disentangler, with exact open-boundary behaviour.
///
/// Bulk values — ZXZ: X flips `{j-1, j+1}`, Z flips `{j}`, Y flips
/// `{j-1, j, j+1}`; ZXXXZ: X flips `{j-2, j+2}`, Z flips `{j-1, j, j+1}`,
/// Y flips `{j-2, .., j+2}`. Near the chain ends the sets follow the
/// truncated disentangler, which the construction here computes exactly.
pub fn flip_set(kind: SopKind, letter: Pauli, j: u32, n: u32) -> Vec<u32> {
    assert!(j >= 1 && j <= n, "error site out of range");
    // Only gates within a +-4 site window can touch the conjugation of a
    // single-site operator through the depth-<=3 disentangler.
    let lo = j.saturating_sub(4).max(1);
    let hi = (j + 4).min(n);
    let mut gates = Vec::new();
    for m in lo..hi {
        gates.push(circuits::Gate::Cz(m, m + 1));
    }
    if kind == SopKind::Zxxxz {
        for m in lo..hi {
            gates.push(circuits::Gate::CyY(m, m + 1));
        }
        for m in lo..=hi {
            gates.push(circuits::Gate::Z(m));
        }
    }
    let conj = circuits::conjugate_through(
        &circuits::GateList::new(gates),
        &PauliString::single(j, letter),
    )
    .expect("disentangler gates are Clifford");
    conj.letters()
        .filter(|&(_, l)| l != Pauli::X)
        .map(|(s, _)| s)
        .collect()
}

/// Precomputed flip masks for every `(site, letter)` of a chain.
pub struct FlipTable {
    kind: SopKind,
    n: u32,
    sets: Vec<[Vec<u32>; 3]>,
}

impl FlipTable {
    pub fn new(kind: SopKind, n: u32) -> Self {
        let sets = (1..=n)
            .map(|j| {
                [
                    flip_set(kind, Pauli::X, j, n),
                    flip_set(kind, Pauli::Y, j, n),
                    flip_set(kind, Pauli::Z, j, n),
                ]
            })
            .collect();
        FlipTable { kind, n, sets }
    }

    pub fn kind(&self) -> SopKind {
        self.kind
    }

    #[inline]
    pub fn flips(&self, site: u32, letter: Pauli) -> &[u32] {
        let k = match letter {
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
        };
        &self.sets[(site - 1) as usize][k]
    }

    /// XORs the flips of one sampled error configuration into `out`.
    #[inline]
    pub fn apply_sampled(&self, ch: &ChannelSpec, rng: &mut impl Rng, out: &mut SyndromeString) {
        let tx = ch.px;
        let txy = ch.px + ch.py;
        let txyz = txy + ch.pz;
        if txyz == 0.0 {
            return;
        }
        for site in 1..=self.n {
            let u: f64 = rng.gen();
            if u >= txyz {
                continue;
            }
            let letter = if u < tx {
                Pauli::X
            } else if u < txy {
                Pauli::Y
            } else {
                Pauli::Z
            };
            for &b in self.flips(site, letter) {
                out.flip(b);
            }
        }
    }
}

/// Exact syndrome sampler for cluster-state inputs: the noise-free
/// measurement is deterministically all-zero, so a shot is just the XOR of
/// the per-error flip sets. Valid at any chain length.
pub fn sample_syndromes_cluster(
    kind: SopKind,
    ch: &ChannelSpec,
    n: u32,
    shots: usize,
    seed: u64,
) -> Vec<SyndromeString> {
    let table = FlipTable::new(kind, n);
    exec::map_shots(shots, |shot| {
        let mut rng = shot_rng(seed, shot as u64);
        let mut out = SyndromeString::zeros(n);
        table.apply_sampled(ch, &mut rng, &mut out);
        out
    })
}

/// Exact syndrome sampler for an arbitrary prepared state on a small
/// chain: the noise-free X-basis distribution after the disentangler is
/// computed once; each shot draws a base string from it and XORs sampled
/// error flips on top (errors commute through the measurement as label
/// flips).
pub struct StateSyndromeSampler {
    n: u32,
    cumulative: Vec<f64>,
    flips: FlipTable,
}

impl StateSyndromeSampler {
    pub fn new(state: &StateVector, kind: SopKind) -> Result<Self> {
        let n = state.n();
        let dis = circuits::disentangler(kind, n);
        let rotated = circuits::apply_gates(&dis, state)?;
        let probs = circuits::x_basis_distribution(&rotated);
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(StateSyndromeSampler {
            n,
            cumulative,
            flips: FlipTable::new(kind, n),
        })
    }

    pub fn sample_one(&self, ch: &ChannelSpec, rng: &mut impl Rng) -> SyndromeString {
        let total = *self.cumulative.last().unwrap();
        let u: f64 = rng.gen::<f64>() * total;
        let idx = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.cumulative.len() - 1);
        let mut out = SyndromeString::from_basis_index(idx, self.n);
        self.flips.apply_sampled(ch, rng, &mut out);
        out
    }

    pub fn sample(&self, ch: &ChannelSpec, shots: usize, seed: u64) -> Vec<SyndromeString> {
        exec::map_shots(shots, |shot| {
            let mut rng = shot_rng(seed, shot as u64);
            self.sample_one(ch, &mut rng)
        })
    }
}

/// Deterministic (full-summation) QCNN output for a noise-free prepared
/// state: `y = sum_x P_x mean_pos(1 - 2 G(x)_pos)`.
pub fn deterministic_output(state: &StateVector, arch: &Architecture) -> Result<f64> {
    let n = state.n();
    arch.validate(n)?;
    let dis = circuits::disentangler(arch.disentangler, n);
    let rotated = circuits::apply_gates(&dis, state)?;
    let probs = circuits::x_basis_distribution(&rotated);
    let mut y = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        if p < 1e-18 {
            continue;
        }
        let bits = SyndromeString::from_basis_index(idx, n);
        let outs = decode(&bits, arch)?;
        let m = outs.len() as f64;
        y += p * outs.iter().map(|&b| 1.0 - 2.0 * (b as u8) as f64).sum::<f64>() / m;
    }
    Ok(y)
}

//! Heisenberg-picture backpropagation of the final X measurement into the
//! multiscale string order parameter, term counting, tracked-family
//! analytics, and sample-complexity bounds.
//!
//! Every operator between correction layers is diagonal in the X basis
//! (the QEC unitaries permute X-basis states), so the whole algebra
//! collapses to Boolean Fourier analysis: operators are real-weighted sums
//! of X-strings, multiplication is symmetric difference of supports, and
//! coefficients stay dyadic rationals in exact mode.

use std::collections::HashMap;

use num_bigint::BigUint;

use crate::circuits::QecLayer;
use crate::decoder::{derive_table, Architecture, DecoderTable};
use crate::groundstate::{expectation, StateVector};
use crate::model::{Pauli, PauliString, SopKind};
use crate::{Error, Result};

/// Exact dyadic rational `num / 2^exp` with `num` odd (or zero).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: i128, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        while self.num % 2 == 0 && self.exp > 0 {
            self.num /= 2;
            self.exp -= 1;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.exp as i32)
    }

    pub fn checked_add(self, other: Dyadic) -> Result<Dyadic> {
        let exp = self.exp.max(other.exp);
        let overflow = || Error::Overflow("dyadic coefficient overflow".into());
        let a = self
            .num
            .checked_shl(exp - self.exp)
            .ok_or_else(overflow)?;
        let b = other
            .num
            .checked_shl(exp - other.exp)
            .ok_or_else(overflow)?;
        Ok(Dyadic::new(a.checked_add(b).ok_or_else(overflow)?, exp))
    }

    pub fn checked_mul(self, other: Dyadic) -> Result<Dyadic> {
        let overflow = || Error::Overflow("dyadic coefficient overflow".into());
        let num = self.num.checked_mul(other.num).ok_or_else(overflow)?;
        let exp = self.exp.checked_add(other.exp).ok_or_else(overflow)?;
        if exp > 500 {
            return Err(overflow());
        }
        Ok(Dyadic::new(num, exp))
    }

    pub fn abs(self) -> Dyadic {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    /// Renders as `num/2^exp` in integer form, e.g. `-3/8`.
    pub fn to_fraction_string(&self) -> String {
        if self.exp == 0 {
            format!("{}", self.num)
        } else {
            format!("{}/{}", self.num, 1u128 << self.exp)
        }
    }
}

/// Sorted site set of an X-string; the engine works on signed positions so
/// unbounded-lattice bookkeeping (term counting) and clipped chains share
/// code.
type Sites = Vec<i64>;

fn symmetric_difference(a: &[i64], b: &[i64]) -> Sites {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Sparse character (Walsh) expansion of an X-basis-diagonal observable:
/// a real-weighted sum of X-strings over a chain of `n` sites.
#[derive(Clone, Debug)]
pub struct XDiagonalOperator {
    n: u32,
    terms: HashMap<Sites, Dyadic>,
}

impl XDiagonalOperator {
    pub fn zero(n: u32) -> Self {
        XDiagonalOperator {
            n,
            terms: HashMap::new(),
        }
    }

    /// A single X-string with unit coefficient.
    pub fn x_string(n: u32, sites: &[u32]) -> Self {
        let mut s: Sites = sites.iter().map(|&v| v as i64).collect();
        s.sort_unstable();
        let mut terms = HashMap::new();
        terms.insert(s, Dyadic::ONE);
        XDiagonalOperator { n, terms }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, sites: &[u32]) -> Dyadic {
        let key: Sites = sites.iter().map(|&v| v as i64).collect();
        self.terms.get(&key).copied().unwrap_or(Dyadic::ZERO)
    }

    /// Terms sorted by support for deterministic iteration.
    pub fn sorted_terms(&self) -> Vec<(Vec<u32>, Dyadic)> {
        let mut v: Vec<(Vec<u32>, Dyadic)> = self
            .terms
            .iter()
            .map(|(s, c)| (s.iter().map(|&x| x as u32).collect(), *c))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Adds `c` times the X-string on `sites` (merging into any existing
    /// term).
    pub fn add_term(&mut self, sites: &[u32], c: Dyadic) -> Result<()> {
        let mut s: Sites = sites.iter().map(|&v| v as i64).collect();
        s.sort_unstable();
        self.insert(s, c)
    }

    fn insert(&mut self, sites: Sites, c: Dyadic) -> Result<()> {
        if c.is_zero() {
            return Ok(());
        }
        use std::collections::hash_map::Entry;
        match self.terms.entry(sites) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().checked_add(c)?;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
        Ok(())
    }

    /// Evaluates the diagonal function at a bit assignment
    /// (`flipped(site)` = true means `X_site = -1`).
    pub fn eval<F: Fn(u32) -> bool>(&self, flipped: F) -> f64 {
        self.terms
            .iter()
            .map(|(sites, c)| {
                let parity = sites.iter().filter(|&&s| flipped(s as u32)).count() % 2;
                if parity == 1 {
                    -c.to_f64()
                } else {
                    c.to_f64()
                }
            })
            .sum()
    }

    /// Exact sum of squared coefficients (Parseval check).
    pub fn sum_of_squares(&self) -> Result<Dyadic> {
        let mut acc = Dyadic::ZERO;
        for c in self.terms.values() {
            acc = acc.checked_add(c.checked_mul(*c)?)?;
        }
        Ok(acc)
    }

    /// One line per term: `coefficient TAB site,site,...`.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for (sites, c) in self.sorted_terms() {
            let list: Vec<String> = sites.iter().map(|s| s.to_string()).collect();
            out.push_str(&c.to_fraction_string());
            out.push('\t');
            out.push_str(&list.join(","));
            out.push('\n');
        }
        out
    }
}

/// Character expansion of `(-1)^{g(x)_p}` for one correction layer at
/// output position `p` of layer `f`: the Walsh transform of the +-1-valued
/// truth table, with coefficients `k / 2^w`.
///
/// Sites outside `[1, n]` read as 0 and drop out of the supports.
pub fn layer_expansion(table: &DecoderTable, f: u32, p: u32, n: u32) -> XDiagonalOperator {
    let mut op = XDiagonalOperator::zero(n);
    for (sites, c) in layer_expansion_raw(table, f, p as i64, Some(n)) {
        op.insert(sites, c).expect("small denominators");
    }
    op
}

/// Raw expansion on the signed lattice; `clip` drops sites outside the
/// chain (reading them as noise-free zeros), `None` keeps everything.
fn layer_expansion_raw(
    table: &DecoderTable,
    f: u32,
    p: i64,
    clip: Option<u32>,
) -> Vec<(Sites, Dyadic)> {
    let w = table.width();
    let scale = 3i64.pow(f - 1);
    let dim = 1u32 << w;
    let mut out: HashMap<Sites, i64> = HashMap::new();
    for mask in 0..dim {
        // Walsh coefficient: 2^-w sum_x (-1)^{g(x)} (-1)^{|x & mask|}.
        let mut acc = 0i64;
        for x in 0..dim {
            let g = table.eval(x) as i64;
            let parity = (x & mask).count_ones() as i64;
            acc += if (g + parity) % 2 == 0 { 1 } else { -1 };
        }
        if acc == 0 {
            continue;
        }
        let mut sites: Sites = Vec::new();
        for (k, &off) in table.offsets.iter().enumerate() {
            if (mask >> k) & 1 == 1 {
                let site = p + off as i64 * scale;
                match clip {
                    Some(n) if site < 1 || site > n as i64 => {
                        // Out-of-chain bit reads 0: X factor is +1, drop it.
                    }
                    _ => sites.push(site),
                }
            }
        }
        sites.sort_unstable();
        *out.entry(sites).or_insert(0) += acc;
    }
    out.into_iter()
        .filter(|(_, k)| *k != 0)
        .map(|(s, k)| (s, Dyadic::new(k as i128, w)))
        .collect()
}

/// Truncation policy for backpropagation.
#[derive(Clone, Copy, Debug)]
pub enum BackpropMode {
    /// Exact expansion; depth <= 2 always fits, depth 3 runs under the
    /// term cap, deeper is rejected.
    Exact { term_cap: usize },
    /// Drop terms with |coefficient| below the threshold after each layer.
    CoeffThreshold(f64),
    /// Keep at most this many largest-coefficient terms after each layer.
    MaxTerms(usize),
}

impl Default for BackpropMode {
    fn default() -> Self {
        BackpropMode::Exact { term_cap: 10_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct BackpropResult {
    pub op: XDiagonalOperator,
    /// True when no truncation occurred anywhere.
    pub exact: bool,
}

/// Backpropagates the measured centre-qubit X observable from layer `d`
/// down through all correction layers: the result is the X-diagonal form
/// of the multiscale string order parameter just after the disentangler.
pub fn backprop(arch: &Architecture, n: u32, mode: BackpropMode) -> Result<BackpropResult> {
    arch.validate(n)?;
    let d = arch.depth();
    if let BackpropMode::Exact { .. } = mode {
        if d > 3 {
            return Err(Error::input(format!(
                "exact backpropagation is capped at depth 3 (got {d}); choose a truncation"
            )));
        }
    }
    let c = n.div_ceil(2);
    let mut op = XDiagonalOperator::x_string(n, &[c]);
    let mut exact = true;
    for f in (1..=d).rev() {
        let table = derive_table(arch.disentangler, arch.layers[f as usize - 1])?;
        op = expand_through_layer(&op, table, f, n, &mode, &mut exact)?;
    }
    Ok(BackpropResult { op, exact })
}

fn expand_through_layer(
    op: &XDiagonalOperator,
    table: &DecoderTable,
    f: u32,
    n: u32,
    mode: &BackpropMode,
    exact: &mut bool,
) -> Result<XDiagonalOperator> {
    let cap = match mode {
        BackpropMode::Exact { term_cap } => *term_cap,
        _ => usize::MAX,
    };
    let mut next = XDiagonalOperator::zero(n);
    for (sites, coeff) in &op.terms {
        // Conjugation is a homomorphism: the image of a product of X's is
        // the symmetric-difference convolution of per-site expansions.
        let mut acc: HashMap<Sites, Dyadic> = HashMap::new();
        acc.insert(Vec::new(), *coeff);
        for &site in sites {
            let expansion = layer_expansion_raw(table, f, site, Some(n));
            let mut grown: HashMap<Sites, Dyadic> = HashMap::with_capacity(acc.len() * 8);
            for (s1, c1) in &acc {
                for (s2, c2) in &expansion {
                    let merged = symmetric_difference(s1, s2);
                    let prod = c1.checked_mul(*c2)?;
                    use std::collections::hash_map::Entry;
                    match grown.entry(merged) {
                        Entry::Vacant(e) => {
                            e.insert(prod);
                        }
                        Entry::Occupied(mut e) => {
                            let sum = e.get().checked_add(prod)?;
                            if sum.is_zero() {
                                e.remove();
                            } else {
                                *e.get_mut() = sum;
                            }
                        }
                    }
                }
            }
            acc = grown;
            if acc.len() > cap {
                return Err(Error::Overflow(format!(
                    "term cap {cap} exceeded while expanding layer f = {f}"
                )));
            }
        }
        for (s, c) in acc {
            next.insert(s, c)?;
        }
        if next.term_count() > cap {
            return Err(Error::Overflow(format!(
                "term cap {cap} exceeded after layer f = {f}"
            )));
        }
    }
    match mode {
        BackpropMode::Exact { .. } => {}
        BackpropMode::CoeffThreshold(eps) => {
            let before = next.term_count();
            next.terms.retain(|_, c| c.to_f64().abs() >= *eps);
            if next.term_count() < before {
                *exact = false;
            }
        }
        BackpropMode::MaxTerms(k) => {
            if next.term_count() > *k {
                let mut all: Vec<(Sites, Dyadic)> = next.terms.drain().collect();
                all.sort_by(|a, b| {
                    b.1.to_f64()
                        .abs()
                        .total_cmp(&a.1.to_f64().abs())
                        .then_with(|| a.0.cmp(&b.0))
                });
                all.truncate(*k);
                for (s, c) in all {
                    next.terms.insert(s, c);
                }
                *exact = false;
            }
        }
    }
    Ok(next)
}

/// Sum of signed Pauli strings with dyadic weights.
#[derive(Clone, Debug, Default)]
pub struct PauliSum(pub Vec<(Dyadic, PauliString)>);

impl PauliSum {
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        let mut acc = 0.0;
        for (c, p) in &self.0 {
            acc += c.to_f64() * expectation(p, state)?;
        }
        Ok(acc)
    }

    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for (c, p) in &self.0 {
            out.push_str(&c.to_fraction_string());
            out.push('\t');
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }
}

/// Conjugates an X-diagonal operator by the CZ-chain disentangler: each
/// `X_j` becomes `Z_{j-1} X_j Z_{j+1}` (chain ends truncated), adjacent
/// `Z^2` pairs cancel, and contiguous even-spaced supports become
/// string order parameters.
pub fn conjugate_by_cz_chain(op: &XDiagonalOperator) -> PauliSum {
    let n = op.n;
    let mut out = Vec::with_capacity(op.term_count());
    for (sites, c) in op.sorted_terms() {
        let mut p = PauliString::identity();
        for &s in &sites {
            let mut factor = PauliString::x(s);
            if s > 1 {
                factor = &factor * &PauliString::z(s - 1);
            }
            if s < n {
                factor = &factor * &PauliString::z(s + 1);
            }
            p = &p * &factor;
        }
        out.push((c, p));
    }
    PauliSum(out)
}

// ---------------------------------------------------------------------------
// Term counting (the paper-style product bookkeeping).

/// Branch: one product in a recursion expansion, as a site set with a sign
/// carried as a dyadic coefficient.
fn gx_branches(j: i64, k: i64, f: u32) -> Vec<(Sites, Dyadic)> {
    let s = 3i64.pow(f - 1);
    let run = |a: i64, b: i64| -> Sites {
        let mut v = Vec::new();
        let mut x = a;
        while x <= b {
            v.push(x);
            x += 2 * s;
        }
        v
    };
    let quarter = |sign: i128| Dyadic::new(sign, 2);
    let gamma = 4 * s;
    let mut out = Vec::with_capacity(16);
    for alpha in [0, 2 * s, 4 * s] {
        for beta in [0, 2 * s, 4 * s] {
            out.push((run(j - alpha, k + beta), quarter(1)));
        }
    }
    for alpha in [0, 2 * s, 4 * s] {
        let mut sites = run(j - alpha, k);
        sites.push(k + gamma);
        sites.sort_unstable();
        out.push((sites, quarter(-1)));
    }
    for alpha in [0, 2 * s, 4 * s] {
        let mut sites = vec![j - gamma];
        sites.extend(run(j, k + alpha));
        sites.sort_unstable();
        out.push((sites, quarter(-1)));
    }
    let mut sites = vec![j - gamma];
    sites.extend(run(j, k));
    sites.push(k + gamma);
    sites.sort_unstable();
    out.push((sites, quarter(1)));
    out
}

/// Majority-layer branches for a single site.
fn gz_branches(site: i64, f: u32) -> Vec<(Sites, Dyadic)> {
    let eps = 7 * 3i64.pow(f - 1);
    let half = |sign: i128| Dyadic::new(sign, 1);
    vec![
        (vec![site - eps], half(1)),
        (vec![site], half(1)),
        (vec![site + eps], half(1)),
        (vec![site - eps, site, site + eps], half(-1)),
    ]
}

/// Maximal runs at spacing `2 * 3^f` — the layer-f string decomposition of
/// a support set.
fn string_runs(sites: &[i64], f: u32) -> Vec<(i64, i64)> {
    let gap = 2 * 3i64.pow(f);
    let mut runs = Vec::new();
    let mut idx = 0;
    while idx < sites.len() {
        let start = sites[idx];
        let mut end = start;
        while idx + 1 < sites.len() && sites[idx + 1] - sites[idx] == gap {
            idx += 1;
            end = sites[idx];
        }
        runs.push((start, end));
        idx += 1;
    }
    runs
}

/// Expands a term through the layer at depth `f` using the recursion
/// branch bookkeeping (16 branches per string through an X layer, 4 per
/// site through a majority layer). Returns every product without merging.
fn expand_term_branches(
    sites: &[i64],
    coeff: Dyadic,
    layer: QecLayer,
    f: u32,
) -> Result<Vec<(Sites, Dyadic)>> {
    let groups: Vec<Vec<(Sites, Dyadic)>> = match layer {
        QecLayer::XCorr | QecLayer::CCorr => string_runs(sites, f)
            .into_iter()
            .map(|(j, k)| gx_branches(j, k, f))
            .collect(),
        QecLayer::ZCorr => sites.iter().map(|&s| gz_branches(s, f)).collect(),
    };
    let mut acc: Vec<(Sites, Dyadic)> = vec![(Vec::new(), coeff)];
    for group in groups {
        let mut grown = Vec::with_capacity(acc.len() * group.len());
        for (s1, c1) in &acc {
            for (s2, c2) in &group {
                grown.push((symmetric_difference(s1, s2), c1.checked_mul(*c2)?));
            }
        }
        acc = grown;
    }
    Ok(acc)
}

/// Number of products of Pauli strings after backpropagating the measured
/// X through `levels_back` layers of the alternating architecture (layer
/// `d` corrects X), with or without algebraic merging.
///
/// Unmerged counts follow the recursion bookkeeping; exact enumeration is
/// limited to three levels (`merged` to two).
pub fn count_terms(d: u32, levels_back: u32, merged: bool) -> Result<BigUint> {
    if levels_back > 3 {
        return Err(Error::input("exact enumeration is capped at 3 levels"));
    }
    if merged && levels_back > 2 {
        return Err(Error::input("merged counting is capped at 2 levels"));
    }
    if d < levels_back || d.is_multiple_of(2) {
        return Err(Error::input(
            "need an odd total depth of at least the backpropagated level count",
        ));
    }
    let layer_kind = |f: u32| {
        if f % 2 == 1 {
            QecLayer::XCorr
        } else {
            QecLayer::ZCorr
        }
    };
    // Materialize products level by level, keeping duplicates.
    let mut terms: Vec<(Sites, Dyadic)> = vec![(vec![0i64], Dyadic::ONE)];
    let materialized = levels_back.min(2);
    for level in 1..=materialized {
        let f = d - level + 1;
        let mut next = Vec::new();
        for (sites, c) in &terms {
            next.extend(expand_term_branches(sites, *c, layer_kind(f), f)?);
        }
        terms = next;
    }
    if levels_back <= 2 {
        if merged {
            let mut map: HashMap<Sites, Dyadic> = HashMap::new();
            for (s, c) in terms {
                let e = map.entry(s).or_insert(Dyadic::ZERO);
                *e = e.checked_add(c)?;
            }
            let count = map.values().filter(|c| !c.is_zero()).count();
            return Ok(BigUint::from(count));
        }
        return Ok(BigUint::from(terms.len()));
    }
    // Third level: multiply per-leaf branch factors without materializing.
    let f = d - 2;
    let mut total = BigUint::from(0u32);
    for (sites, _) in &terms {
        let factor: BigUint = match layer_kind(f) {
            QecLayer::XCorr | QecLayer::CCorr => {
                BigUint::from(16u32).pow(string_runs(sites, f).len() as u32)
            }
            QecLayer::ZCorr => BigUint::from(4u32).pow(sites.len() as u32),
        };
        total += factor;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Tracked family and complexity bounds.

/// One per-layer record of the analytically tracked product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrackedLayer {
    pub f: u32,
    /// Length of the inner string in the tracked product.
    pub l: u64,
    /// Endpoints of the tracked product relative to the centre qubit.
    pub j_offset: i64,
    pub k_offset: i64,
}

/// The family of products followed analytically through every layer to
/// certify exponentially long strings in the multiscale observable.
#[derive(Clone, Debug)]
pub struct TrackedFamily {
    pub d: u32,
    pub layers: Vec<TrackedLayer>,
    /// Left/right attachment offsets per layer (odd-f kappa, even-f
    /// lambda values).
    pub attachments: Vec<(u32, Vec<i64>)>,
    /// Final string order parameter length `2 l_0 + 1 = (3^d + 17) / 4`.
    pub final_length: u64,
}

/// Computes the tracked family for an odd depth `d >= 3` via the layer
/// recursions `l -> 3l + 2` (X layers) and `l -> 3l - 5` (majority
/// layers), starting from `l = 1` at layer `d - 2`.
pub fn tracked_family(d: u32) -> Result<TrackedFamily> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(Error::input(format!(
            "tracked family needs odd depth >= 3, got {d}"
        )));
    }
    let mut layers = Vec::new();
    let mut attachments = Vec::new();
    let mut l: u64 = 1;
    let mut f = d - 2;
    loop {
        let scale = 3i64.pow(f);
        layers.push(TrackedLayer {
            f,
            l,
            j_offset: -(l as i64) * scale,
            k_offset: l as i64 * scale,
        });
        let offs = attachment_offsets(d, f);
        attachments.push((f, offs));
        if f == 0 {
            break;
        }
        // Passing through layer f: odd layers correct X, even majority.
        l = if f % 2 == 1 { 3 * l + 2 } else { 3 * l - 5 };
        f -= 1;
    }
    Ok(TrackedFamily {
        d,
        layers,
        attachments,
        final_length: 2 * l + 1,
    })
}

/// Left-string attachment offsets at layer `f`: `kappa_g` for odd `f`,
/// `lambda_g` for even `f`.
fn attachment_offsets(d: u32, f: u32) -> Vec<i64> {
    let mut offs = Vec::new();
    if f % 2 == 1 {
        if d >= 4 + f {
            for g in 0..=(d - 4 - f) / 2 {
                let kappa = (23 * 9i64.pow(g) + 1) / 8 * 3i64.pow(f);
                offs.push(kappa);
            }
        }
    } else if d >= 5 + f {
        for g in 0..=(d - 5 - f) / 2 {
            let lambda = (69 * 9i64.pow(g) - 13) / 8 * 3i64.pow(f);
            offs.push(lambda);
        }
    }
    offs
}

/// Closed forms for the tracked lengths, used as the second route in
/// validation: `l_f = (3^{d-f} - 1)/8` for odd `f`, `(3^{d-f} + 13)/8`
/// for even `f`; `L = (3^d + 17)/4`.
pub fn tracked_length_closed_form(d: u32, f: u32) -> u64 {
    let pow = 3u64.pow(d - f);
    if f % 2 == 1 {
        (pow - 1) / 8
    } else {
        (pow + 13) / 8
    }
}

pub fn final_length_closed_form(d: u32) -> u64 {
    (3u64.pow(d) + 17) / 4
}

/// Measurement-cost bounds of the multiscale observable as exact big
/// integers.
#[derive(Clone, Debug)]
pub struct ComplexityBounds {
    /// Lower bound on the number of products of string order parameters:
    /// `2^{3^{d-2}}`.
    pub product_bound: BigUint,
    /// Lower bound on the number of incompatible local-Pauli bases in the
    /// printed closed form `3^{3^{d-4}}` (defined for `d >= 4`).
    pub basis_bound_formula: Option<BigUint>,
    /// The sharper bound `3^{2 l_2}` with `l_2 = (3^{d-2} + 13)/8`.
    pub basis_bound_l2: BigUint,
}

pub fn complexity_bounds(d: u32) -> Result<ComplexityBounds> {
    if d < 3 {
        return Err(Error::input(format!(
            "complexity bounds are defined for depth >= 3 (formula bound >= 4), got {d}"
        )));
    }
    if d > 21 {
        return Err(Error::input(
            "depth beyond 21 overflows the exponent range of the bounds",
        ));
    }
    let product_bound = BigUint::from(2u32).pow(3u32.pow(d - 2));
    let basis_bound_formula =
        (d >= 4).then(|| BigUint::from(3u32).pow(3u32.pow(d - 4)));
    let l2 = (3u64.pow(d - 2) + 13) / 8;
    let basis_bound_l2 = BigUint::from(3u32).pow(2 * l2 as u32);
    Ok(ComplexityBounds {
        product_bound,
        basis_bound_formula,
        basis_bound_l2,
    })
}

/// Greedy grouping of Pauli terms into qubit-wise compatible measurement
/// sets; the group count upper-bounds the minimal number of local Pauli
/// bases.
pub fn greedy_basis_cover(terms: &[PauliString]) -> usize {
    let mut groups: Vec<HashMap<u32, Pauli>> = Vec::new();
    'term: for t in terms {
        for g in groups.iter_mut() {
            let compatible = t
                .letters()
                .all(|(site, p)| g.get(&site).is_none_or(|&q| q == p));
            if compatible {
                for (site, p) in t.letters() {
                    g.insert(site, p);
                }
                continue 'term;
            }
        }
        groups.push(t.letters().collect());
    }
    groups.len()
}

// ---------------------------------------------------------------------------
// Recursion verification against dense unitary conjugation.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecursionKind {
    Gx,
    Gz,
}

/// Conjugates the layer-f string through the actual QEC unitary by dense
/// statevector simulation and compares against the recursion's predicted
/// expansion; returns the maximum coefficient deviation.
pub fn verify_recursion(which: RecursionKind, f: u32) -> Result<f64> {
    match which {
        RecursionKind::Gx => {
            // Single X at the centre of an 11-qubit window (string length
            // 1); the window spans c-5..c+5 at f = 1.
            if f != 1 {
                return Err(Error::input(
                    "dense windows beyond f = 1 exceed the 16-qubit cap",
                ));
            }
            let c = 6i64;
            let window: Vec<u32> = (1..=11).collect();
            let gates = crate::circuits::qec_unitary(SopKind::Zxz, QecLayer::XCorr, 1, c as u32)?;
            let predicted = gx_branches(c, c, 1);
            verify_expansion(&gates, &window, &[c], &predicted)
        }
        RecursionKind::Gz => {
            if f != 1 {
                return Err(Error::input(
                    "dense windows beyond f = 1 exceed the 16-qubit cap",
                ));
            }
            let c = 8i64;
            let gates = crate::circuits::qec_unitary(SopKind::Zxz, QecLayer::ZCorr, 1, c as u32)?;
            let window = gates.light_cone();
            let predicted = gz_branches(c, 1);
            verify_expansion(&gates, &window, &[c], &predicted)
        }
    }
}

/// Dense-window oracle: applies `gates` as a unitary to every X-basis
/// state of `window`, conjugates the X-string on `g_sites` by full
/// statevector simulation (`Q^dagger G Q`), verifies the result is
/// X-diagonal, and compares all Walsh coefficients against `predicted`.
pub fn verify_expansion(
    gates: &crate::circuits::GateList,
    window: &[u32],
    g_sites: &[i64],
    predicted: &[(Sites, Dyadic)],
) -> Result<f64> {
    use crate::circuits::{apply_gates, apply_pauli, hadamard_all as hadamard_window};
    let w = window.len() as u32;
    if w > 16 {
        return Err(Error::input("dense window exceeds 16 qubits"));
    }
    // Remap everything onto local qubits 1..=w via a relabelled gate list.
    let local_gates: crate::circuits::GateList = {
        let text = gates.to_string();
        let mut relabelled = String::new();
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap_or_default();
            relabelled.push_str(kind);
            for tok in parts {
                let site: u32 = tok.parse().map_err(|_| Error::input("bad gate text"))?;
                let pos = window
                    .iter()
                    .position(|&ws| ws == site)
                    .ok_or_else(|| Error::input("gate outside window"))?;
                relabelled.push(' ');
                relabelled.push_str(&(pos + 1).to_string());
            }
            relabelled.push('\n');
        }
        relabelled.parse()?
    };
    let g_string = {
        let mut p = PauliString::identity();
        for &s in g_sites {
            let pos = window
                .iter()
                .position(|&ws| ws as i64 == s)
                .ok_or_else(|| Error::input("string site outside window"))?;
            p = &p * &PauliString::x(pos as u32 + 1);
        }
        p
    };
    let dim = 1usize << w;
    let mut diag = vec![0f64; dim];
    let mut max_offdiag = 0f64;
    for label in 0..dim {
        // X-basis input state |label> with local qubit i+1 carrying bit i.
        let mut idx = 0usize;
        for bit in 0..w {
            if (label >> bit) & 1 == 1 {
                idx |= 1 << (w - 1 - bit);
            }
        }
        let mut s = StateVector::basis_state(w, idx);
        hadamard_window(&mut s);
        let qs = apply_gates(&local_gates, &s)?;
        let gqs = apply_pauli(&g_string, &qs);
        let out = apply_gates(&local_gates.reversed(), &gqs)?;
        let mut out = out;
        hadamard_window(&mut out);
        for (b, a) in out.amplitudes().iter().enumerate() {
            let mut out_label = 0usize;
            for bit in 0..w {
                if (b >> (w - 1 - bit)) & 1 == 1 {
                    out_label |= 1 << bit;
                }
            }
            if out_label == label {
                if a.im.abs() > max_offdiag {
                    max_offdiag = a.im.abs();
                }
                diag[label] = a.re;
            } else if a.norm() > max_offdiag {
                max_offdiag = a.norm();
            }
        }
    }
    if max_offdiag > 1e-10 {
        return Err(Error::CondViolated(format!(
            "conjugated operator is not X-diagonal (off-diagonal {max_offdiag})"
        )));
    }
    // Fast Walsh transform of the diagonal gives all 2^w coefficients.
    let mut coeffs = diag;
    let mut len = 1usize;
    while len < dim {
        for b in (0..dim).step_by(len * 2) {
            for i in b..b + len {
                let (lo, hi) = (coeffs[i], coeffs[i + len]);
                coeffs[i] = lo + hi;
                coeffs[i + len] = lo - hi;
            }
        }
        len *= 2;
    }
    for c in coeffs.iter_mut() {
        *c /= dim as f64;
    }
    // Predicted coefficients, indexed by window mask.
    let mut expected = vec![0f64; dim];
    for (sites, c) in predicted {
        let mut mask = 0usize;
        for &s in sites {
            let pos = window
                .iter()
                .position(|&ws| ws as i64 == s)
                .ok_or_else(|| Error::input("predicted site outside window"))?;
            mask |= 1 << pos;
        }
        expected[mask] += c.to_f64();
    }
    let mut max_dev = 0f64;
    for (got, want) in coeffs.iter().zip(&expected) {
        max_dev = max_dev.max((got - want).abs());
    }
    Ok(max_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::GateList;
    use crate::noise::shot_rng;
    use rand::Rng;

    #[test]
    fn dyadic_arithmetic() {
        let a = Dyadic::new(3, 3); // 3/8
        let b = Dyadic::new(-1, 3); // -1/8
        assert_eq!(a.checked_add(b).unwrap(), Dyadic::new(1, 2));
        assert_eq!(a.checked_mul(b).unwrap(), Dyadic::new(-3, 6));
        assert_eq!(Dyadic::new(4, 2), Dyadic::new(1, 0));
        assert_eq!(Dyadic::new(-6, 3).to_fraction_string(), "-3/4");
        assert_eq!(Dyadic::new(2, 0).to_fraction_string(), "2");
    }

    #[test]
    fn majority_layer_expansion() {
        let table = derive_table(SopKind::Zxz, QecLayer::ZCorr).unwrap();
        let op = layer_expansion(table, 1, 30, 601);
        assert_eq!(op.term_count(), 4);
        assert_eq!(op.coefficient(&[23]), Dyadic::new(1, 1));
        assert_eq!(op.coefficient(&[30]), Dyadic::new(1, 1));
        assert_eq!(op.coefficient(&[37]), Dyadic::new(1, 1));
        assert_eq!(op.coefficient(&[23, 30, 37]), Dyadic::new(-1, 1));
    }

    #[test]
    fn xcorr_layer_expansion_is_sixteen_quarters() {
        let table = derive_table(SopKind::Zxz, QecLayer::XCorr).unwrap();
        let op = layer_expansion(table, 1, 30, 601);
        assert_eq!(op.term_count(), 16);
        for (_, c) in op.sorted_terms() {
            assert_eq!(c.abs(), Dyadic::new(1, 2));
        }
        // Matches the recursion branches at j = k = 30.
        for (sites, c) in gx_branches(30, 30, 1) {
            let sites_u: Vec<u32> = sites.iter().map(|&s| s as u32).collect();
            assert_eq!(op.coefficient(&sites_u), c, "branch {sites:?}");
        }
    }

    #[test]
    fn identity_layer_expansion() {
        let identity = DecoderTable::custom(QecLayer::XCorr, vec![0], 0b10);
        let op = layer_expansion(&identity, 1, 5, 9);
        assert_eq!(op.term_count(), 1);
        assert_eq!(op.coefficient(&[5]), Dyadic::ONE);
    }

    #[test]
    fn backprop_depth_one_is_the_layer_expansion() {
        let arch = Architecture::x_only(SopKind::Zxz, 1);
        let r = backprop(&arch, 15, BackpropMode::default()).unwrap();
        assert!(r.exact);
        assert_eq!(r.op.term_count(), 16);
        let table = derive_table(SopKind::Zxz, QecLayer::XCorr).unwrap();
        let direct = layer_expansion(table, 1, 8, 15);
        for (sites, c) in direct.sorted_terms() {
            assert_eq!(r.op.coefficient(&sites), c);
        }
    }

    #[test]
    fn backprop_is_plus_minus_one_valued_and_parseval() {
        for arch in [
            Architecture::x_only(SopKind::Zxz, 1),
            Architecture::x_only(SopKind::Zxz, 2),
            Architecture::alternating(SopKind::Zxz, 2),
        ] {
            let r = backprop(&arch, 15, BackpropMode::default()).unwrap();
            assert!(r.exact);
            // Parseval: exact unit norm.
            assert_eq!(r.op.sum_of_squares().unwrap(), Dyadic::ONE, "{arch:?}");
            // The diagonal takes values in {-1, +1}.
            for trial in 0..1000u64 {
                let mut rng = shot_rng(21, trial);
                let bits: Vec<bool> = (0..=15).map(|_| rng.gen::<bool>()).collect();
                let v = r.op.eval(|site| bits[site as usize]);
                assert!(
                    (v.abs() - 1.0).abs() < 1e-9,
                    "{arch:?}: value {v} at trial {trial}"
                );
            }
        }
    }

    #[test]
    fn exact_backprop_depth_cap() {
        let arch = Architecture::alternating(SopKind::Zxz, 4);
        let err = backprop(&arch, 135, BackpropMode::default());
        assert!(matches!(err, Err(Error::Input(_))));
        let tiny_cap = backprop(
            &Architecture::alternating(SopKind::Zxz, 3),
            45,
            BackpropMode::Exact { term_cap: 10 },
        );
        assert!(matches!(tiny_cap, Err(Error::Overflow(_))));
    }

    #[test]
    fn truncated_backprop_flags_inexact() {
        let arch = Architecture::alternating(SopKind::Zxz, 3);
        let r = backprop(&arch, 45, BackpropMode::MaxTerms(50)).unwrap();
        assert!(!r.exact);
        assert!(r.op.term_count() <= 50);
        let r2 = backprop(&arch, 45, BackpropMode::CoeffThreshold(0.2)).unwrap();
        assert!(!r2.exact);
    }

    #[test]
    fn conjugation_examples() {
        // Single site.
        let op = XDiagonalOperator::x_string(15, &[7]);
        let s = conjugate_by_cz_chain(&op);
        assert_eq!(s.0.len(), 1);
        assert_eq!(s.0[0].1.to_string(), "+Z6 X7 Z8");
        // Contiguous even-spaced support becomes one string operator.
        let op = XDiagonalOperator::x_string(15, &[7, 9, 11]);
        let s = conjugate_by_cz_chain(&op);
        assert_eq!(s.0[0].1.to_string(), "+Z6 X7 X9 X11 Z12");
        // Empty support is the identity.
        let op = XDiagonalOperator::zero(15);
        let s = conjugate_by_cz_chain(&op);
        assert!(s.0.is_empty());
        // Chain-end truncation.
        let op = XDiagonalOperator::x_string(15, &[1]);
        let s = conjugate_by_cz_chain(&op);
        assert_eq!(s.0[0].1.to_string(), "+X1 Z2");
    }

    #[test]
    fn conjugated_strings_are_sops() {
        use crate::model::{sop_pauli, SopSpec};
        let op = XDiagonalOperator::x_string(15, &[6, 8, 10]);
        let s = conjugate_by_cz_chain(&op);
        let want = sop_pauli(SopSpec::new(SopKind::Zxz, 5, 11).unwrap());
        assert_eq!(s.0[0].1, want);
    }

    #[test]
    fn term_counts_match_the_tabulation() {
        assert_eq!(count_terms(5, 0, false).unwrap(), BigUint::from(1u32));
        assert_eq!(count_terms(5, 1, false).unwrap(), BigUint::from(16u32));
        assert_eq!(count_terms(5, 2, false).unwrap(), BigUint::from(2500u32));
        // Scale invariance of the bookkeeping.
        assert_eq!(count_terms(7, 2, false).unwrap(), BigUint::from(2500u32));
        assert_eq!(count_terms(3, 2, false).unwrap(), BigUint::from(2500u32));
    }

    #[test]
    fn merged_counts_do_not_exceed_unmerged() {
        let unmerged = count_terms(5, 2, false).unwrap();
        let merged = count_terms(5, 2, true).unwrap();
        assert!(merged <= unmerged);
        assert!(merged > BigUint::from(0u32));
        assert_eq!(count_terms(5, 1, true).unwrap(), BigUint::from(16u32));
        assert!(count_terms(5, 3, true).is_err());
        assert!(count_terms(4, 2, false).is_err());
    }

    #[test]
    fn third_level_count_is_consistent() {
        // Every level-2 leaf contributes at least 16 (one string run), so
        // the third level exceeds 16 * 2500.
        let c3 = count_terms(5, 3, false).unwrap();
        assert!(c3 >= BigUint::from(40_000u32));
    }

    #[test]
    fn tracked_family_small_depths() {
        let t3 = tracked_family(3).unwrap();
        let ls: Vec<u64> = t3.layers.iter().map(|l| l.l).collect();
        assert_eq!(ls, vec![1, 5]);
        assert_eq!(t3.final_length, 11);

        let t5 = tracked_family(5).unwrap();
        assert_eq!(t5.layers.last().unwrap().l, 32);
        assert_eq!(t5.final_length, 65);
        assert_eq!(final_length_closed_form(5), 65);

        assert!(tracked_family(4).is_err());
        assert!(tracked_family(1).is_err());
    }

    #[test]
    fn tracked_recursion_matches_closed_forms() {
        for d in [3u32, 5, 7, 9] {
            let fam = tracked_family(d).unwrap();
            for layer in &fam.layers {
                assert_eq!(
                    layer.l,
                    tracked_length_closed_form(d, layer.f),
                    "d={d} f={}",
                    layer.f
                );
                assert_eq!(layer.j_offset, -(layer.l as i64) * 3i64.pow(layer.f));
            }
            assert_eq!(fam.final_length, final_length_closed_form(d));
        }
    }

    #[test]
    fn complexity_bounds_examples() {
        let b5 = complexity_bounds(5).unwrap();
        assert_eq!(b5.product_bound, BigUint::from(134_217_728u64)); // 2^27
        assert_eq!(b5.basis_bound_formula.unwrap(), BigUint::from(27u32)); // 3^3
        assert_eq!(b5.basis_bound_l2, BigUint::from(59_049u32)); // 3^10

        let b3 = complexity_bounds(3).unwrap();
        assert_eq!(b3.product_bound, BigUint::from(8u32));
        assert!(b3.basis_bound_formula.is_none());
        assert_eq!(b3.basis_bound_l2, BigUint::from(81u32)); // l_2 = 2

        assert!(complexity_bounds(2).is_err());

        for d in 4..=9u32 {
            let b = complexity_bounds(d).unwrap();
            assert!(
                b.basis_bound_l2 >= b.basis_bound_formula.unwrap(),
                "inequality fails at d = {d}"
            );
        }
    }

    #[test]
    fn greedy_cover_examples() {
        use crate::model::PauliString;
        let x1 = PauliString::x(1);
        let x1x2 = PauliString::from_letters([(1, Pauli::X), (2, Pauli::X)]);
        assert_eq!(greedy_basis_cover(&[x1.clone(), x1x2]), 1);

        let xz = PauliString::from_letters([(1, Pauli::X), (2, Pauli::Z)]);
        let zx = PauliString::from_letters([(1, Pauli::Z), (2, Pauli::X)]);
        let yy = PauliString::from_letters([(1, Pauli::Y), (2, Pauli::Y)]);
        assert_eq!(greedy_basis_cover(&[xz, zx, yy]), 3);

        assert_eq!(greedy_basis_cover(&[]), 0);
    }

    #[test]
    fn depth_one_conjugated_expansion_needs_one_basis() {
        // All 16 depth-1 terms conjugate to operators with X on even
        // offsets and Z on odd offsets from the centre: one local basis
        // measures them all (golden value 1).
        let arch = Architecture::x_only(SopKind::Zxz, 1);
        let r = backprop(&arch, 15, BackpropMode::default()).unwrap();
        let sum = conjugate_by_cz_chain(&r.op);
        let strings: Vec<PauliString> = sum.0.iter().map(|(_, p)| p.clone()).collect();
        assert_eq!(greedy_basis_cover(&strings), 1);
    }

    #[test]
    fn recursion_oracles_below_tolerance() {
        let dev_x = verify_recursion(RecursionKind::Gx, 1).unwrap();
        assert!(dev_x < 1e-10, "gx deviation {dev_x}");
        let dev_z = verify_recursion(RecursionKind::Gz, 1).unwrap();
        assert!(dev_z < 1e-10, "gz deviation {dev_z}");
    }

    #[test]
    fn identity_circuit_recursion_is_exact() {
        let window: Vec<u32> = (1..=5).collect();
        let predicted = vec![(vec![3i64], Dyadic::ONE)];
        let dev = verify_expansion(&GateList::default(), &window, &[3], &predicted).unwrap();
        assert!(dev < 1e-12, "deviation {dev}");
    }

    #[test]
    fn gz_recursion_for_a_two_site_string() {
        // Product of two majority windows at adjacent survivors.
        let f = 1u32;
        let d1 = 8i64;
        let d2 = 14i64;
        let g1 = crate::circuits::qec_unitary(SopKind::Zxz, QecLayer::ZCorr, f, d1 as u32).unwrap();
        let g2 = crate::circuits::qec_unitary(SopKind::Zxz, QecLayer::ZCorr, f, d2 as u32).unwrap();
        let mut gates = g1;
        gates.extend(&g2);
        let window = gates.light_cone();
        let mut predicted = Vec::new();
        for (s1, c1) in gz_branches(d1, f) {
            for (s2, c2) in gz_branches(d2, f) {
                predicted.push((
                    symmetric_difference(&s1, &s2),
                    c1.checked_mul(c2).unwrap(),
                ));
            }
        }
        let dev = verify_expansion(&gates, &window, &[d1, d2], &predicted).unwrap();
        assert!(dev < 1e-10, "deviation {dev}");
    }

    #[test]
    fn export_text_format() {
        let arch = Architecture::x_only(SopKind::Zxz, 1);
        let r = backprop(&arch, 15, BackpropMode::default()).unwrap();
        let text = r.op.export_text();
        assert!(text.lines().count() == 16);
        assert!(text.contains("1/4\t"));
        let sum = conjugate_by_cz_chain(&r.op);
        let stext = sum.export_text();
        assert!(stext.contains("\t+") || stext.contains("\t-"));
    }
}

//! Core domain types: Hamiltonian couplings, sparse signed Pauli strings,
//! stabilizers and string order parameters of the generalized cluster-Ising
//! chain.
//!
//! Conventions used throughout the crate:
//! - sites are 1-based,
//! - phases are tracked as an exponent of `i` modulo 4, never as floats,
//! - identity sites are never stored.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;

use crate::{Error, Result};

/// Single-site Pauli letter. Identity is represented by absence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Product of two letters: `(letter, i-exponent)` with `None` for identity.
fn letter_mul(a: Pauli, b: Pauli) -> (Option<Pauli>, u8) {
    use Pauli::*;
    match (a, b) {
        (X, X) | (Y, Y) | (Z, Z) => (None, 0),
        (X, Y) => (Some(Z), 1),
        (Y, X) => (Some(Z), 3),
        (Y, Z) => (Some(X), 1),
        (Z, Y) => (Some(X), 3),
        (Z, X) => (Some(Y), 1),
        (X, Z) => (Some(Y), 3),
    }
}

/// Signed multi-site Pauli operator with sparse letter storage.
///
/// The operator is `i^phase_exp * prod_j letter_j`. Operators of interest
/// touch O(L) sites of chains up to N = 1215, so letters are kept in a
/// sorted map from site index to letter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    phase_exp: u8,
    letters: BTreeMap<u32, Pauli>,
}

impl Default for PauliString {
    fn default() -> Self {
        Self::identity()
    }
}

impl PauliString {
    pub fn identity() -> Self {
        PauliString {
            phase_exp: 0,
            letters: BTreeMap::new(),
        }
    }

    /// Single-letter operator at `site` (1-based).
    pub fn single(site: u32, p: Pauli) -> Self {
        assert!(site >= 1, "sites are 1-based");
        let mut letters = BTreeMap::new();
        letters.insert(site, p);
        PauliString {
            phase_exp: 0,
            letters,
        }
    }

    pub fn x(site: u32) -> Self {
        Self::single(site, Pauli::X)
    }

    pub fn y(site: u32) -> Self {
        Self::single(site, Pauli::Y)
    }

    pub fn z(site: u32) -> Self {
        Self::single(site, Pauli::Z)
    }

    /// Builds a phase-free string from `(site, letter)` pairs.
    ///
    /// Duplicate sites are multiplied out exactly.
    pub fn from_letters<I: IntoIterator<Item = (u32, Pauli)>>(iter: I) -> Self {
        let mut acc = PauliString::identity();
        for (site, p) in iter {
            acc = &acc * &PauliString::single(site, p);
        }
        acc
    }

    /// Exponent of `i` in the overall phase, modulo 4.
    pub fn phase_exp(&self) -> u8 {
        self.phase_exp
    }

    /// Multiplies the phase by `i^k`.
    pub fn mul_phase(&mut self, k: u8) {
        self.phase_exp = (self.phase_exp + k) % 4;
    }

    pub fn letter(&self, site: u32) -> Option<Pauli> {
        self.letters.get(&site).copied()
    }

    pub fn letters(&self) -> impl Iterator<Item = (u32, Pauli)> + '_ {
        self.letters.iter().map(|(&s, &p)| (s, p))
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.letters.keys().copied()
    }

    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    pub fn max_site(&self) -> Option<u32> {
        self.letters.keys().next_back().copied()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty() && self.phase_exp == 0
    }

    /// Hermitian operators carry phase ±1 (the letter product itself is
    /// Hermitian since letters on distinct sites commute).
    pub fn is_hermitian(&self) -> bool {
        self.phase_exp.is_multiple_of(2)
    }

    /// Sign of the phase for Hermitian strings.
    pub fn sign(&self) -> Result<i8> {
        match self.phase_exp {
            0 => Ok(1),
            2 => Ok(-1),
            _ => Err(Error::input("non-Hermitian phase +/-i")),
        }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut anti = 0usize;
        for (site, a) in self.letters() {
            if let Some(b) = other.letter(site) {
                if a != b {
                    anti += 1;
                }
            }
        }
        anti.is_multiple_of(2)
    }
}

impl Mul for &PauliString {
    type Output = PauliString;

    fn mul(self, rhs: &PauliString) -> PauliString {
        let mut phase_exp = (self.phase_exp + rhs.phase_exp) % 4;
        let mut letters = self.letters.clone();
        for (site, b) in rhs.letters() {
            match letters.remove(&site) {
                None => {
                    letters.insert(site, b);
                }
                Some(a) => {
                    let (prod, k) = letter_mul(a, b);
                    phase_exp = (phase_exp + k) % 4;
                    if let Some(p) = prod {
                        letters.insert(site, p);
                    }
                }
            }
        }
        PauliString { phase_exp, letters }
    }
}

impl fmt::Display for PauliString {
    /// Renders e.g. `+Z1 X2 Z3`; the identity prints as `+1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase_exp {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for (n, (site, p)) in self.letters().enumerate() {
            if n > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p:?}{site}")?;
        }
        Ok(())
    }
}

/// Couplings and chain length of the generalized cluster-Ising Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianParams {
    /// Coupling of the three-site `Z X Z` stabilizer terms.
    pub j1: f64,
    /// Coupling of the five-site `Z X X X Z` stabilizer terms.
    pub j2: f64,
    /// Transverse field (single-site `X`).
    pub h1: f64,
    /// Nearest-neighbour `X X` coupling.
    pub h2: f64,
    /// Chain length; odd and at least 7 so the centre site is an integer
    /// and the five-site terms exist.
    pub n: u32,
}

impl HamiltonianParams {
    pub fn new(j1: f64, j2: f64, h1: f64, h2: f64, n: u32) -> Result<Self> {
        let p = HamiltonianParams { j1, j2, h1, h2, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 7 || self.n.is_multiple_of(2) {
            return Err(Error::input(format!(
                "chain length must be odd and >= 7, got {}",
                self.n
            )));
        }
        for (name, v) in [
            ("j1", self.j1),
            ("j2", self.j2),
            ("h1", self.h1),
            ("h2", self.h2),
        ] {
            if !v.is_finite() {
                return Err(Error::input(format!("coupling {name} must be finite")));
            }
        }
        Ok(())
    }

    /// Centre site `(N+1)/2`.
    pub fn center(&self) -> u32 {
        self.n.div_ceil(2)
    }
}

/// Which cluster phase / string-order-parameter family an object belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SopKind {
    /// Three-site `Z X Z` stabilizer family.
    Zxz,
    /// Five-site `Z X X X Z` stabilizer family.
    Zxxxz,
}

/// Endpoints of a string order parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SopSpec {
    pub kind: SopKind,
    pub j: u32,
    pub k: u32,
}

impl SopSpec {
    pub fn new(kind: SopKind, j: u32, k: u32) -> Result<Self> {
        if j < 1 || k <= j || !(k - j).is_multiple_of(2) {
            return Err(Error::input(format!(
                "string endpoints must satisfy k - j even and positive, got j={j} k={k}"
            )));
        }
        if kind == SopKind::Zxxxz && k - j < 6 {
            return Err(Error::input(format!(
                "ZXXXZ string needs span k - j >= 6, got {}",
                k - j
            )));
        }
        Ok(SopSpec { kind, j, k })
    }

    /// Operator length `L = k - j + 1` (always odd).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u32 {
        self.k - self.j + 1
    }
}

/// The string order parameter as an explicit Pauli string (phase +1).
pub fn sop_pauli(spec: SopSpec) -> PauliString {
    let SopSpec { kind, j, k } = spec;
    let mut letters: Vec<(u32, Pauli)> = vec![(j, Pauli::Z), (k, Pauli::Z)];
    match kind {
        SopKind::Zxz => {
            // Z_j X_{j+1} X_{j+3} ... X_{k-1} Z_k
            let mut s = j + 1;
            while s < k {
                letters.push((s, Pauli::X));
                s += 2;
            }
        }
        SopKind::Zxxxz => {
            // Z_j X_{j+1} Y_{j+2} (X_{j+4} X_{j+6} ... X_{k-4}) Y_{k-2} X_{k-1} Z_k
            letters.push((j + 1, Pauli::X));
            letters.push((j + 2, Pauli::Y));
            let mut s = j + 4;
            while s + 4 <= k {
                letters.push((s, Pauli::X));
                s += 2;
            }
            letters.push((k - 2, Pauli::Y));
            letters.push((k - 1, Pauli::X));
        }
    }
    PauliString::from_letters(letters)
}

/// Stabilizer element `C_j = Z_{j-1} X_j Z_{j+1}` or
/// `D_j = Z_{j-2} X_{j-1} X_j X_{j+1} Z_{j+2}` on a chain of length `n`.
pub fn stabilizer(kind: SopKind, j: u32, n: u32) -> Result<PauliString> {
    match kind {
        SopKind::Zxz => {
            if j < 2 || j > n - 1 {
                return Err(Error::input(format!(
                    "ZXZ stabilizer needs 2 <= j <= N-1, got j={j}, N={n}"
                )));
            }
            Ok(PauliString::from_letters([
                (j - 1, Pauli::Z),
                (j, Pauli::X),
                (j + 1, Pauli::Z),
            ]))
        }
        SopKind::Zxxxz => {
            if j < 3 || j > n - 2 {
                return Err(Error::input(format!(
                    "ZXXXZ stabilizer needs 3 <= j <= N-2, got j={j}, N={n}"
                )));
            }
            Ok(PauliString::from_letters([
                (j - 2, Pauli::Z),
                (j - 1, Pauli::X),
                (j, Pauli::X),
                (j + 1, Pauli::X),
                (j + 2, Pauli::Z),
            ]))
        }
    }
}

/// Sublattice parity for the symmetry generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sublattice {
    Even,
    Odd,
}

/// Product of X over even or odd sites; generators of the protecting
/// Z2 x Z2 symmetry.
pub fn symmetry_generator(which: Sublattice, n: u32) -> PauliString {
    let start = match which {
        Sublattice::Even => 2,
        Sublattice::Odd => 1,
    };
    PauliString::from_letters((start..=n).step_by(2).map(|s| (s, Pauli::X)))
}

/// All Hamiltonian terms as `(coefficient, operator)` pairs:
/// `H = -J1 sum C_j - J2 sum D_j - h1 sum X_j - h2 sum X_j X_{j+1}`.
pub fn hamiltonian_terms(p: &HamiltonianParams) -> Vec<(f64, PauliString)> {
    let n = p.n;
    let mut terms = Vec::new();
    if p.j1 != 0.0 {
        for j in 2..=n - 1 {
            terms.push((-p.j1, stabilizer(SopKind::Zxz, j, n).unwrap()));
        }
    }
    if p.j2 != 0.0 {
        for j in 3..=n - 2 {
            terms.push((-p.j2, stabilizer(SopKind::Zxxxz, j, n).unwrap()));
        }
    }
    if p.h1 != 0.0 {
        for j in 1..=n {
            terms.push((-p.h1, PauliString::x(j)));
        }
    }
    if p.h2 != 0.0 {
        for j in 1..=n - 1 {
            terms.push((
                -p.h2,
                PauliString::from_letters([(j, Pauli::X), (j + 1, Pauli::X)]),
            ));
        }
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_qubit_products() {
        let x1 = PauliString::x(1);
        let z1 = PauliString::z(1);
        let p = &x1 * &z1;
        // X Z = -i Y
        assert_eq!(p.phase_exp(), 3);
        assert_eq!(p.letter(1), Some(Pauli::Y));
        assert_eq!(p.to_string(), "-iY1");

        let sq = &z1 * &z1;
        assert!(sq.is_identity());
        assert_eq!(sq.to_string(), "+1");
    }

    #[test]
    fn sop_zxz_examples() {
        let s = sop_pauli(SopSpec::new(SopKind::Zxz, 1, 5).unwrap());
        assert_eq!(s.to_string(), "+Z1 X2 X4 Z5");
        let minimal = sop_pauli(SopSpec::new(SopKind::Zxz, 3, 5).unwrap());
        assert_eq!(minimal, stabilizer(SopKind::Zxz, 4, 9).unwrap());
    }

    #[test]
    fn sop_zxxxz_minimal_has_empty_middle() {
        let t = sop_pauli(SopSpec::new(SopKind::Zxxxz, 1, 7).unwrap());
        assert_eq!(t.to_string(), "+Z1 X2 Y3 Y5 X6 Z7");
    }

    #[test]
    fn sop_zxxxz_longer_span() {
        let t = sop_pauli(SopSpec::new(SopKind::Zxxxz, 1, 9).unwrap());
        assert_eq!(t.to_string(), "+Z1 X2 Y3 X5 Y7 X8 Z9");
    }

    #[test]
    fn sop_spec_rejects_bad_endpoints() {
        assert!(SopSpec::new(SopKind::Zxz, 1, 4).is_err());
        assert!(SopSpec::new(SopKind::Zxz, 5, 5).is_err());
        assert!(SopSpec::new(SopKind::Zxxxz, 1, 5).is_err());
    }

    #[test]
    fn stabilizer_examples_and_ranges() {
        assert_eq!(
            stabilizer(SopKind::Zxz, 2, 9).unwrap().to_string(),
            "+Z1 X2 Z3"
        );
        assert_eq!(
            stabilizer(SopKind::Zxxxz, 3, 9).unwrap().to_string(),
            "+Z1 X2 X3 X4 Z5"
        );
        assert!(stabilizer(SopKind::Zxz, 1, 9).is_err());
        assert!(stabilizer(SopKind::Zxz, 9, 9).is_err());
        assert!(stabilizer(SopKind::Zxxxz, 2, 9).is_err());
    }

    #[test]
    fn stabilizers_telescope_to_sop() {
        // C_2 C_4 = S_{1,5}
        let c2 = stabilizer(SopKind::Zxz, 2, 9).unwrap();
        let c4 = stabilizer(SopKind::Zxz, 4, 9).unwrap();
        let prod = &c2 * &c4;
        assert_eq!(prod, sop_pauli(SopSpec::new(SopKind::Zxz, 1, 5).unwrap()));

        // prod_i C_{j+2i-1} = S_{jk} for j=1, k=9.
        let mut acc = PauliString::identity();
        for i in 1..=4 {
            acc = &acc * &stabilizer(SopKind::Zxz, 2 * i, 11).unwrap();
        }
        assert_eq!(acc, sop_pauli(SopSpec::new(SopKind::Zxz, 1, 9).unwrap()));
    }

    #[test]
    fn sop_equals_stabilizer_product_all_spans() {
        let n = 15;
        for j in 1..=n {
            for k in (j + 2..=n.min(j + 12)).step_by(2) {
                let spec = SopSpec::new(SopKind::Zxz, j, k).unwrap();
                let mut acc = PauliString::identity();
                let mut m = j + 1;
                while m < k {
                    acc = &acc * &stabilizer(SopKind::Zxz, m, n).unwrap();
                    m += 2;
                }
                assert_eq!(acc, sop_pauli(spec), "span j={j} k={k}");
            }
        }
    }

    #[test]
    fn symmetry_generators_commute_with_all_terms() {
        let p = HamiltonianParams::new(1.0, 0.7, 0.5, 0.3, 11).unwrap();
        let pe = symmetry_generator(Sublattice::Even, p.n);
        let po = symmetry_generator(Sublattice::Odd, p.n);
        for (_, term) in hamiltonian_terms(&p) {
            assert_eq!(&term * &pe, &pe * &term, "term {term} vs P_e");
            assert_eq!(&term * &po, &po * &term, "term {term} vs P_o");
        }
    }

    #[test]
    fn params_validation() {
        assert!(HamiltonianParams::new(1.0, 0.0, 0.0, 0.0, 8).is_err());
        assert!(HamiltonianParams::new(1.0, 0.0, 0.0, 0.0, 5).is_err());
        assert!(HamiltonianParams::new(f64::NAN, 0.0, 0.0, 0.0, 9).is_err());
        assert!(HamiltonianParams::new(1.0, 0.0, 0.5, 0.0, 9).is_ok());
    }

    fn arb_pauli_string(n: u32) -> impl Strategy<Value = PauliString> {
        let letter = prop_oneof![Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)];
        (
            proptest::collection::btree_map(1..=n, letter, 0..=6),
            0u8..4,
        )
            .prop_map(|(letters, k)| {
                let mut s = PauliString::from_letters(letters);
                s.mul_phase(k);
                s
            })
    }

    proptest! {
        #[test]
        fn mul_is_associative(
            a in arb_pauli_string(9),
            b in arb_pauli_string(9),
            c in arb_pauli_string(9),
        ) {
            let left = &(&a * &b) * &c;
            let right = &a * &(&b * &c);
            prop_assert_eq!(left, right);
        }

        #[test]
        fn identity_is_neutral(a in arb_pauli_string(9)) {
            let id = PauliString::identity();
            prop_assert_eq!(&(&a * &id), &a);
            prop_assert_eq!(&(&id * &a), &a);
        }

        #[test]
        fn squares_are_scalar(a in arb_pauli_string(9)) {
            let sq = &a * &a;
            prop_assert_eq!(sq.weight(), 0);
        }
    }
}

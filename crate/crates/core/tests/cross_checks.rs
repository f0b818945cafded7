//! Cross-module consistency checks: the fast syndrome path against a
//! density-matrix oracle, the deep circuit form against the classical
//! decoder, and the analytically expanded string products against direct
//! Pauli algebra.

use num_complex::Complex64;

use spt_qcnn::bits::BitString;
use spt_qcnn::circuits::{
    apply_gates, apply_pauli, cluster_state, disentangler, entangler, hadamard_all, qec_layer_full,
    qec_unitary, GateList, QecLayer,
};
use spt_qcnn::decoder::{
    decode, derive_table, sample_syndromes_cluster, Architecture, StateSyndromeSampler,
    SyndromeString,
};
use spt_qcnn::groundstate::{expectation, StateVector};
use spt_qcnn::heisenberg::{conjugate_by_cz_chain, layer_expansion, Dyadic, XDiagonalOperator};
use spt_qcnn::model::{stabilizer, PauliString, SopKind};
use spt_qcnn::noise::ChannelSpec;

/// Test-only density-matrix simulator: exact evolution of the noisy
/// cluster state through the channel and the disentangler, producing the
/// exact X-basis measurement distribution.
struct DensityMatrix {
    n: u32,
    elems: Vec<Complex64>, // row-major 2^n x 2^n
}

impl DensityMatrix {
    fn pure(state: &StateVector) -> Self {
        let dim = state.amplitudes().len();
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                elems[r * dim + c] = state.amplitudes()[r] * state.amplitudes()[c].conj();
            }
        }
        DensityMatrix {
            n: state.n(),
            elems,
        }
    }

    fn dim(&self) -> usize {
        1 << self.n
    }

    /// rho -> sum_l K_l rho K_l^dagger for the single-site Pauli channel,
    /// site by site.
    fn apply_channel(&mut self, ch: &ChannelSpec) {
        use spt_qcnn::model::Pauli;
        let p1 = 1.0 - ch.px - ch.py - ch.pz;
        for site in 1..=self.n {
            let mut out = self.scaled(p1);
            for (weight, letter) in [(ch.px, Pauli::X), (ch.py, Pauli::Y), (ch.pz, Pauli::Z)] {
                if weight == 0.0 {
                    continue;
                }
                let p = PauliString::single(site, letter);
                let mut branch = self.conjugated_by(&p);
                for e in branch.elems.iter_mut() {
                    *e *= weight;
                }
                for (o, b) in out.elems.iter_mut().zip(&branch.elems) {
                    *o += b;
                }
            }
            *self = out;
        }
    }

    fn scaled(&self, w: f64) -> DensityMatrix {
        DensityMatrix {
            n: self.n,
            elems: self.elems.iter().map(|e| e * w).collect(),
        }
    }

    /// P rho P^dagger via column and row statevector application.
    fn conjugated_by(&self, p: &PauliString) -> DensityMatrix {
        self.transform(|col| apply_pauli(p, col))
    }

    fn apply_gates(&mut self, gates: &GateList) {
        *self = self.transform(|col| apply_gates(gates, col).unwrap());
    }

    fn hadamard_all(&mut self) {
        *self = self.transform(|col| {
            let mut c = col.clone();
            hadamard_all(&mut c);
            c
        });
    }

    /// U rho U^dagger given the column map |v> -> U|v>.
    fn transform<F: Fn(&StateVector) -> StateVector>(&self, f: F) -> DensityMatrix {
        let dim = self.dim();
        let apply_cols = |m: &[Complex64]| -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
            for c in 0..dim {
                let col: Vec<Complex64> = (0..dim).map(|r| m[r * dim + c]).collect();
                let sv = StateVector::from_amplitudes(self.n, col).unwrap();
                let mapped = f(&sv);
                for (r, a) in mapped.amplitudes().iter().enumerate() {
                    out[r * dim + c] = *a;
                }
            }
            out
        };
        // U rho U^dagger = U (U rho^dagger)^dagger; rho is Hermitian.
        let step1 = apply_cols(&self.elems);
        let dagger: Vec<Complex64> = {
            let mut d = vec![Complex64::new(0.0, 0.0); dim * dim];
            for r in 0..dim {
                for c in 0..dim {
                    d[r * dim + c] = step1[c * dim + r].conj();
                }
            }
            d
        };
        let step2 = apply_cols(&dagger);
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                out[r * dim + c] = step2[c * dim + r].conj();
            }
        }
        DensityMatrix { n: self.n, elems: out }
    }

    fn diagonal(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|i| self.elems[i * dim + i].re).collect()
    }
}

/// Exact X-basis outcome distribution of the noisy cluster state after the
/// disentangler, via the density-matrix oracle.
fn exact_noisy_distribution(kind: SopKind, ch: &ChannelSpec, n: u32) -> Vec<f64> {
    let mut rho = DensityMatrix::pure(&cluster_state(kind, n));
    rho.apply_channel(ch);
    rho.apply_gates(&disentangler(kind, n));
    rho.hadamard_all();
    rho.diagonal()
}

/// The fast path's exact distribution: enumerate error configurations and
/// accumulate the probability of each flip pattern.
fn exact_fast_path_distribution(kind: SopKind, ch: &ChannelSpec, n: u32) -> Vec<f64> {
    let flips = spt_qcnn::decoder::FlipTable::new(kind, n);
    let probs = [1.0 - ch.px - ch.py - ch.pz, ch.px, ch.py, ch.pz];
    let letters = [
        None,
        Some(spt_qcnn::model::Pauli::X),
        Some(spt_qcnn::model::Pauli::Y),
        Some(spt_qcnn::model::Pauli::Z),
    ];
    let mut dist = vec![0.0f64; 1 << n];
    let configs = 4usize.pow(n);
    for cfg in 0..configs {
        let mut weight = 1.0;
        let mut pattern = BitString::zeros(n);
        let mut code = cfg;
        for site in 1..=n {
            let w = code % 4;
            code /= 4;
            weight *= probs[w];
            if weight == 0.0 {
                break;
            }
            if let Some(letter) = letters[w] {
                for &b in flips.flips(site, letter) {
                    pattern.flip(b);
                }
            }
        }
        if weight > 0.0 {
            dist[pattern.to_basis_index()] += weight;
        }
    }
    dist
}

#[test]
fn fast_path_distribution_equals_density_matrix_oracle() {
    let n = 9u32;
    for (kind, ch) in [
        (SopKind::Zxz, ChannelSpec::depolarizing(0.1).unwrap()),
        (SopKind::Zxz, ChannelSpec::new(0.05, 0.02, 0.12).unwrap()),
        (SopKind::Zxxxz, ChannelSpec::depolarizing(0.1).unwrap()),
        (SopKind::Zxxxz, ChannelSpec::new(0.08, 0.0, 0.06).unwrap()),
    ] {
        let oracle = exact_noisy_distribution(kind, &ch, n);
        let fast = exact_fast_path_distribution(kind, &ch, n);
        let tv: f64 = oracle
            .iter()
            .zip(&fast)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-12, "{kind:?} {ch}: total variation {tv}");
    }
}

#[test]
fn sampled_syndromes_pass_chi_squared_against_oracle() {
    let n = 9u32;
    let shots = 100_000usize;
    for kind in [SopKind::Zxz, SopKind::Zxxxz] {
        let ch = ChannelSpec::depolarizing(0.1).unwrap();
        let expected = exact_noisy_distribution(kind, &ch, n);
        let samples = sample_syndromes_cluster(kind, &ch, n, shots, 2024);
        let mut counts = vec![0usize; 1 << n];
        for s in &samples {
            counts[s.to_basis_index()] += 1;
        }
        // Pool cells with small expectation.
        let mut chi2 = 0.0;
        let mut df = 0usize;
        let mut pool_obs = 0.0;
        let mut pool_exp = 0.0;
        for (i, &e) in expected.iter().enumerate() {
            let exp_count = e * shots as f64;
            if exp_count >= 10.0 {
                let diff = counts[i] as f64 - exp_count;
                chi2 += diff * diff / exp_count;
                df += 1;
            } else {
                pool_obs += counts[i] as f64;
                pool_exp += exp_count;
            }
        }
        if pool_exp > 10.0 {
            let diff = pool_obs - pool_exp;
            chi2 += diff * diff / pool_exp;
            df += 1;
        }
        let df = df.saturating_sub(1) as f64;
        // Normal approximation: chi2 ~ df +- sqrt(2 df).
        assert!(
            chi2 < df + 5.0 * (2.0 * df).sqrt(),
            "{kind:?}: chi2 = {chi2:.1} at df = {df}"
        );
        assert!(
            chi2 > df - 5.0 * (2.0 * df).sqrt(),
            "{kind:?}: suspiciously small chi2 = {chi2:.1} at df = {df}"
        );
    }
}

/// The exact-state sampler (arbitrary prepared state) agrees with the
/// density-matrix oracle as well; checked on a perturbed ground state.
#[test]
fn state_sampler_matches_oracle_marginals() {
    let n = 9u32;
    let params = spt_qcnn::model::HamiltonianParams::new(1.0, 0.0, 0.3, 0.1, n).unwrap();
    let g = spt_qcnn::groundstate::ground_state(&params, 1e-10).unwrap();
    let ch = ChannelSpec::depolarizing(0.05).unwrap();

    let mut rho = DensityMatrix::pure(&g.state);
    rho.apply_channel(&ch);
    rho.apply_gates(&disentangler(SopKind::Zxz, n));
    rho.hadamard_all();
    let expected = rho.diagonal();

    let sampler = StateSyndromeSampler::new(&g.state, SopKind::Zxz).unwrap();
    let shots = 200_000usize;
    let samples = sampler.sample(&ch, shots, 77);
    for site in 1..=n {
        let want: f64 = expected
            .iter()
            .enumerate()
            .filter(|(idx, _)| (idx >> (n - site)) & 1 == 1)
            .map(|(_, p)| p)
            .sum();
        let got = samples.iter().filter(|s| s.get(site)).count() as f64 / shots as f64;
        let sigma = (want * (1.0 - want) / shots as f64).sqrt().max(1e-6);
        assert!(
            (got - want).abs() < 5.0 * sigma,
            "site {site}: {got:.5} vs {want:.5}"
        );
    }
}

/// Shallow (classical post-processing) and deep (explicit pooling
/// unitaries) circuit forms produce the same outputs.
#[test]
fn deep_circuit_equals_classical_decoding() {
    let n = 9u32;
    let c = n.div_ceil(2);
    let arch = Architecture::x_only(SopKind::Zxz, 1);
    let qec = qec_layer_full(SopKind::Zxz, QecLayer::XCorr, 1, n).unwrap();
    // Deep form: disentangle, entangle the sublattice, apply the bare QEC
    // unitary (the tilde form conjugated by the sublattice entangler),
    // disentangle the sublattice again, then measure X on the survivors.
    let sub_entangler = GateList::new(vec![
        spt_qcnn::circuits::Gate::Cz(2, 5),
        spt_qcnn::circuits::Gate::Cz(5, 8),
    ]);
    for (letter_site, letter) in [
        (4u32, spt_qcnn::model::Pauli::X),
        (5, spt_qcnn::model::Pauli::Z),
        (7, spt_qcnn::model::Pauli::Y),
        (2, spt_qcnn::model::Pauli::Z),
    ] {
        let noisy = apply_pauli(&PauliString::single(letter_site, letter), &cluster_state(SopKind::Zxz, n));

        // Classical route: exact outcome distribution, decoded.
        let rotated = apply_gates(&disentangler(SopKind::Zxz, n), &noisy).unwrap();
        let probs = spt_qcnn::circuits::x_basis_distribution(&rotated);
        let mut y_classical = 0.0;
        for (idx, &p) in probs.iter().enumerate() {
            if p < 1e-18 {
                continue;
            }
            let bits = SyndromeString::from_basis_index(idx, n);
            let outs = decode(&bits, &arch).unwrap();
            let mid = outs.len() / 2;
            y_classical += p * (1.0 - 2.0 * (outs[mid] as u8) as f64);
        }

        // Deep route: all unitaries applied to the state, then <X_c>.
        let mut state = apply_gates(&disentangler(SopKind::Zxz, n), &noisy).unwrap();
        state = apply_gates(&sub_entangler, &state).unwrap();
        let mut bare_qec = sub_entangler.reversed();
        bare_qec.extend(&qec);
        bare_qec.extend(&sub_entangler);
        state = apply_gates(&bare_qec, &state).unwrap();
        state = apply_gates(&sub_entangler.reversed(), &state).unwrap();
        let y_deep = expectation(&PauliString::x(c), &state).unwrap();

        assert!(
            (y_classical - y_deep).abs() < 1e-10,
            "{letter:?}@{letter_site}: classical {y_classical} vs deep {y_deep}"
        );
    }
}

/// The expanded single-survivor factor reproduces the
/// half-weighted stabilizer-product structure (the A C B factors) exactly.
#[test]
fn expanded_survivor_factor_has_stabilizer_product_structure() {
    let n = 15u32;
    let zeta = 8u32;
    let table = derive_table(SopKind::Zxz, QecLayer::XCorr).unwrap();
    let op = layer_expansion(table, 1, zeta, n);
    let via_engine = conjugate_by_cz_chain(&op);

    // Direct construction: (1/2)(C_{z-4}C_{z-2} - C_{z-4} + C_{z-2} + 1)
    // * C_z * (1/2)(1 + C_{z+2} - C_{z+4} + C_{z+2}C_{z+4}).
    let c = |j: u32| stabilizer(SopKind::Zxz, j, n).unwrap();
    let half = Dyadic::new(1, 1);
    let neg_half = Dyadic::new(-1, 1);
    let a_factor: Vec<(Dyadic, PauliString)> = vec![
        (half, &c(zeta - 4) * &c(zeta - 2)),
        (neg_half, c(zeta - 4)),
        (half, c(zeta - 2)),
        (half, PauliString::identity()),
    ];
    let b_factor: Vec<(Dyadic, PauliString)> = vec![
        (half, PauliString::identity()),
        (half, c(zeta + 2)),
        (neg_half, c(zeta + 4)),
        (half, &c(zeta + 2) * &c(zeta + 4)),
    ];
    let mut direct: Vec<(Dyadic, PauliString)> = Vec::new();
    for (ca, pa) in &a_factor {
        for (cb, pb) in &b_factor {
            let coeff = ca.checked_mul(*cb).unwrap();
            let prod = &(pa * &c(zeta)) * pb;
            direct.push((coeff, prod));
        }
    }
    assert_eq!(via_engine.0.len(), 16);
    assert_eq!(direct.len(), 16);
    for (coeff, string) in &direct {
        let found = via_engine
            .0
            .iter()
            .find(|(_, p)| p == string)
            .unwrap_or_else(|| panic!("missing term {string}"));
        assert_eq!(found.0, *coeff, "coefficient of {string}");
        // Coefficient pattern: +-1/2 per factor.
        assert_eq!(coeff.abs(), Dyadic::new(1, 2));
    }
}

/// Expanding the tracked three-survivor product X_{c-3} X_c X_{c+3}
/// through one correcting layer stays a +-1-valued observable of unit
/// Fourier weight, and merging only ever cancels whole terms.
#[test]
fn tracked_product_expansion_stays_unit_weight() {
    let n = 21u32;
    let c = 11u32;
    let table = derive_table(SopKind::Zxz, QecLayer::XCorr).unwrap();
    let mut acc = XDiagonalOperator::x_string(n, &[]);
    for site in [c - 3, c, c + 3] {
        let e = layer_expansion(table, 1, site, n);
        acc = multiply(&acc, &e);
    }
    // Overlapping same-parity windows cancel most of the 16^3 raw
    // products; the merged count is deterministic.
    assert_eq!(acc.term_count(), 256);
    // Parseval: the product of +-1-valued observables is +-1-valued.
    assert_eq!(acc.sum_of_squares().unwrap(), Dyadic::ONE);
    use rand::Rng;
    for trial in 0..200u64 {
        let mut rng = spt_qcnn::noise::shot_rng(3, trial);
        let bits: Vec<bool> = (0..=n).map(|_| rng.gen()).collect();
        let v = acc.eval(|s| bits[s as usize]);
        assert!((v.abs() - 1.0).abs() < 1e-9, "value {v}");
    }
}

fn multiply(a: &XDiagonalOperator, b: &XDiagonalOperator) -> XDiagonalOperator {
    let mut out = XDiagonalOperator::zero(a.n());
    for (s1, c1) in a.sorted_terms() {
        for (s2, c2) in b.sorted_terms() {
            let mut merged: Vec<u32> = Vec::new();
            let mut i = 0;
            let mut j = 0;
            while i < s1.len() && j < s2.len() {
                match s1[i].cmp(&s2[j]) {
                    std::cmp::Ordering::Less => {
                        merged.push(s1[i]);
                        i += 1;
                    }
                    std::cmp::Ordering::Greater => {
                        merged.push(s2[j]);
                        j += 1;
                    }
                    std::cmp::Ordering::Equal => {
                        i += 1;
                        j += 1;
                    }
                }
            }
            merged.extend_from_slice(&s1[i..]);
            merged.extend_from_slice(&s2[j..]);
            out.add_term(&merged, c1.checked_mul(c2).unwrap()).unwrap();
        }
    }
    out
}

/// Monte-Carlo estimates of noisy string order match the closed forms.
#[test]
fn sop_attenuation_monte_carlo() {
    use spt_qcnn::exec;
    let n = 31u32;
    let shots = 20_000usize;
    // Pure-Z grid: <S_jk> = (1 - 2 pZ)^{(L-1)/2}; estimated via the parity
    // of the disentangled X-string, sampled on the fast path.
    for (pz, l) in [(0.05, 5u32), (0.1, 9), (0.2, 13)] {
        let ch = ChannelSpec::pure_z(pz).unwrap();
        let j = (n - l) / 2 + 1;
        let k = j + l - 1;
        let sites: Vec<u32> = (j + 1..k).step_by(2).collect();
        let samples = sample_syndromes_cluster(SopKind::Zxz, &ch, n, shots, 91);
        let vals: Vec<f64> = samples
            .iter()
            .map(|s| if s.parity_at(&sites) { -1.0 } else { 1.0 })
            .collect();
        let (mean, se) = exec::mean_stderr(&vals);
        let expected = (1.0 - 2.0 * pz).powi(((l - 1) / 2) as i32);
        assert!(
            (mean - expected).abs() < 3.0 * se + 1e-3,
            "pZ={pz} L={l}: {mean} vs {expected} (se {se})"
        );
    }
}

/// The entangler/disentangler pair leaves arbitrary states invariant.
#[test]
fn entangler_inverts_disentangler() {
    for kind in [SopKind::Zxz, SopKind::Zxxxz] {
        let c = cluster_state(kind, 9);
        let back = apply_gates(&entangler(kind, 9), &apply_gates(&disentangler(kind, 9), &c).unwrap()).unwrap();
        assert!(back.fidelity(&c) > 1.0 - 1e-12);
    }
}

/// Window extraction works for every layer at higher depths too:
/// the scaled window of layer f=2 passes the permutation condition.
#[test]
fn scaled_windows_satisfy_condition() {
    let gates = qec_unitary(SopKind::Zxz, QecLayer::XCorr, 2, 27).unwrap();
    let window = gates.light_cone();
    assert_eq!(window, vec![15, 21, 27, 33, 39]);
    let perm = spt_qcnn::circuits::extract_permutation(&gates, &window).unwrap();
    assert_eq!(perm.map(0), 0);
}

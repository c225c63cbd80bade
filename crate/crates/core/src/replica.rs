//! The four-copy replicated space.
//!
//! A replicated site carries copy levels `(i1, i2, i3, i4)` for
//! (ket, bra, ket, bra), flattened as `((i1·q + i2)·q + i3)·q + i4`. The
//! replicated gate is `u ⊗ u* ⊗ u ⊗ u*`; it is applied copy by copy, so the
//! `q⁸×q⁸` matrix is only ever built for small oracles.
//!
//! Pair states:
//!
//! ```text
//! |0_{a,b}>[i] = a[i1,i2] b[i3,i4] / √q        (bonds 1–2 and 3–4)
//! <1_{a,b}|v>  = Σ a[i2,i3] b[i4,i1] v[i] / √q  (bonds 2–3 and 4–1)
//! ```
//!
//! so `<1_{a,b}|0_{c,d}> = tr(c a d b)/q`. Undecorated states use identities.

use crate::linalg::{apply_pair, kron};
use crate::{CMatrix, Error, Result, C64};

pub fn site_dim(q: usize) -> usize {
    q.pow(4)
}

pub fn site_index(q: usize, levels: [usize; 4]) -> usize {
    ((levels[0] * q + levels[1]) * q + levels[2]) * q + levels[3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Zero,
    One,
}

/// A (possibly decorated) pair state on one replicated site, stored as a ket.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub kind: PairKind,
    pub q: usize,
    pub data: Vec<C64>,
}

impl PairState {
    /// `<self|v>` for a single-site vector.
    pub fn overlap(&self, v: &[C64]) -> C64 {
        crate::linalg::dot(&self.data, v)
    }
}

fn check_square(m: &CMatrix, q: usize) -> Result<()> {
    if m.shape() != (q, q) {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: m.nrows(),
        });
    }
    Ok(())
}

/// Builds `|0_{a,b}>` or `|1_{a,b}>` (see module docs for the bond layout).
pub fn make_pair_state(kind: PairKind, a: &CMatrix, b: &CMatrix, q: usize) -> Result<PairState> {
    check_square(a, q)?;
    check_square(b, q)?;
    let norm = 1.0 / (q as f64).sqrt();
    let mut data = vec![C64::new(0.0, 0.0); site_dim(q)];
    for i1 in 0..q {
        for i2 in 0..q {
            for i3 in 0..q {
                for i4 in 0..q {
                    let value = match kind {
                        PairKind::Zero => a[(i1, i2)] * b[(i3, i4)],
                        // Stored as a ket, so the bra carries the plain entries.
                        PairKind::One => (a[(i2, i3)] * b[(i4, i1)]).conj(),
                    };
                    data[site_index(q, [i1, i2, i3, i4])] = value * norm;
                }
            }
        }
    }
    Ok(PairState { kind, q, data })
}

pub fn pair_zero(q: usize) -> PairState {
    let id = CMatrix::identity(q, q);
    make_pair_state(PairKind::Zero, &id, &id, q).expect("identity has the right shape")
}

pub fn pair_one(q: usize) -> PairState {
    let id = CMatrix::identity(q, q);
    make_pair_state(PairKind::One, &id, &id, q).expect("identity has the right shape")
}

/// Dense `u ⊗ u* ⊗ u ⊗ u*` with both sites' copy legs interleaved to match
/// the site flattening: row index `q⁴·(left site) + (right site)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedGate {
    pub q: usize,
    pub matrix: CMatrix,
}

/// Largest `q⁸` for which [`replicate_gate`] builds the dense matrix.
pub const DENSE_REPLICA_LIMIT: usize = 1 << 12;

pub fn replicate_gate(u: &crate::gates::UnitaryGate) -> Result<ReplicatedGate> {
    let q = u.q;
    let n = q.pow(8);
    if n > DENSE_REPLICA_LIMIT {
        return Err(Error::TooLarge {
            what: "dense replicated gate",
            dim: n,
            limit: DENSE_REPLICA_LIMIT,
        });
    }
    // Identity on both sites, then every copy factor applied in place.
    let factors = CopyFactors::forward(&u.matrix);
    let mut matrix = CMatrix::zeros(n, n);
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        col[j] = C64::new(1.0, 0.0);
        apply_replicated(&mut col, q, 2, 0, 1, &factors);
        matrix.set_column(j, &crate::CVector::from_column_slice(&col));
    }
    Ok(ReplicatedGate { q, matrix })
}

/// Per-copy factors of a replicated gate, `[c1, c2, c3, c4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyFactors(pub [CMatrix; 4]);

impl CopyFactors {
    /// `u ⊗ u* ⊗ u ⊗ u*`
    pub fn forward(u: &CMatrix) -> Self {
        let c = u.conjugate();
        Self([u.clone(), c.clone(), u.clone(), c])
    }

    /// `u† ⊗ uᵀ ⊗ u† ⊗ uᵀ`
    pub fn adjoint(u: &CMatrix) -> Self {
        let a = u.adjoint();
        let t = u.transpose();
        Self([a.clone(), t.clone(), a, t])
    }

    /// Dense `q⁸` form with copy-major legs (not the site flattening);
    /// only used by tests.
    pub fn copy_major(&self) -> CMatrix {
        kron(&kron(&self.0[0], &self.0[1]), &kron(&self.0[2], &self.0[3]))
    }
}

/// Applies a replicated gate to replicated sites `(left, right)` of a tensor
/// with `n_sites` sites.
pub fn apply_replicated(data: &mut [C64], q: usize, n_sites: usize, left: usize, right: usize, f: &CopyFactors) {
    for (c, m) in f.0.iter().enumerate() {
        apply_pair(data, q, 4 * n_sites, 4 * left + c, 4 * right + c, m);
    }
}

/// Kronecker product of single-site vectors, site 0 slowest.
pub fn product_state(sites: &[&[C64]]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for s in sites {
        let mut next = Vec::with_capacity(out.len() * s.len());
        for a in &out {
            for b in s.iter() {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// `<s_0 ⊗ … ⊗ s_{n-1}|v>` without forming the product state.
pub fn product_overlap(sites: &[&[C64]], v: &[C64]) -> C64 {
    let mut cur: Vec<C64> = v.to_vec();
    for s in sites.iter().rev() {
        let d = s.len();
        cur = cur
            .chunks(d)
            .map(|chunk| chunk.iter().zip(s.iter()).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + y.conj() * x))
            .collect();
    }
    debug_assert_eq!(cur.len(), 1);
    cur[0]
}

/// Contracts the last site of `v` with `<s|`.
pub fn contract_last(v: &[C64], s: &[C64]) -> Vec<C64> {
    v.chunks(s.len())
        .map(|chunk| chunk.iter().zip(s).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + y.conj() * x))
        .collect()
}

/// Contracts the first site of `v` with `<s|`.
pub fn contract_first(v: &[C64], s: &[C64]) -> Vec<C64> {
    let rest = v.len() / s.len();
    let mut out = vec![C64::new(0.0, 0.0); rest];
    for (k, sk) in s.iter().enumerate() {
        let c = sk.conj();
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, x) in out.iter_mut().zip(&v[k * rest..(k + 1) * rest]) {
            *o += c * x;
        }
    }
    out
}

/// `s ⊗ v`
pub fn prepend_site(s: &[C64], v: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(s.len() * v.len());
    for a in s {
        out.extend(v.iter().map(|b| a * b));
    }
    out
}

/// `v ⊗ s`
pub fn append_site(v: &[C64], s: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(s.len() * v.len());
    for a in v {
        out.extend(s.iter().map(|b| a * b));
    }
    out
}

/// Generalized Pauli matrix `σ^{j,k} = Σ_m ω^{jm} |m+k><m|`, labelled
/// `μ = j + q·k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPauli {
    pub q: usize,
    pub j: usize,
    pub k: usize,
    pub matrix: CMatrix,
}

impl GeneralizedPauli {
    pub fn mu(&self) -> usize {
        self.j + self.q * self.k
    }

    pub fn from_mu(mu: usize, q: usize) -> Result<Self> {
        generalized_pauli(mu % q, mu / q, q)
    }
}

pub fn generalized_pauli(j: usize, k: usize, q: usize) -> Result<GeneralizedPauli> {
    if j >= q || k >= q {
        return Err(Error::BadParams(format!("Pauli labels ({j},{k}) out of range for q = {q}")));
    }
    let omega = std::f64::consts::TAU / q as f64;
    let mut matrix = CMatrix::zeros(q, q);
    for m in 0..q {
        matrix[((m + k) % q, m)] = C64::from_polar(1.0, omega * ((j * m) % q) as f64);
    }
    Ok(GeneralizedPauli { q, j, k, matrix })
}

/// Default probe: `σ_z` at `q = 2`, the clock matrix `σ^{1,0}` otherwise.
pub fn default_probe(q: usize) -> CMatrix {
    generalized_pauli(1, 0, q).expect("q ≥ 2").matrix
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{build_gate, GateSpec, Model, Position, UnitaryGate};
    use crate::linalg::{dot, frobenius_sq, max_abs};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn overlap_table() {
        for q in [2, 3, 4] {
            let (z, o) = (pair_zero(q), pair_one(q));
            assert!((z.overlap(&z.data) - c(q as f64)).norm() < 1e-12);
            assert!((o.overlap(&o.data) - c(q as f64)).norm() < 1e-12);
            assert!((o.overlap(&z.data) - c(1.0)).norm() < 1e-12);
            assert!((z.overlap(&o.data) - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn decorated_norms_and_overlaps() {
        let sz = default_probe(2);
        let d = make_pair_state(PairKind::Zero, &sz, &sz, 2).unwrap();
        assert!((dot(&d.data, &d.data) - c(2.0)).norm() < 1e-12);
        for q in [2, 3] {
            let s = default_probe(q);
            let sd = s.adjoint();
            let r = make_pair_state(PairKind::Zero, &sd, &s, q).unwrap();
            let l = make_pair_state(PairKind::One, &sd, &s, q).unwrap();
            assert!((pair_one(q).overlap(&r.data) - c(1.0)).norm() < 1e-12);
            assert!((l.overlap(&pair_zero(q).data) - c(1.0)).norm() < 1e-12);
            // tr(σ†σ†σσ)/q for a traceless clock matrix.
            let expect = (&sd * &sd * &s * &s).trace() / c(q as f64);
            assert!((l.overlap(&r.data) - expect).norm() < 1e-12);
        }
        assert!(make_pair_state(PairKind::Zero, &default_probe(3), &sz, 2).is_err());
    }

    #[test]
    fn replicated_gate_fixed_points() {
        let u = build_gate(&GateSpec::new(Model::Hrm, 2).with_seed(5), Position::new(0, 0)).unwrap();
        let g = replicate_gate(&u).unwrap();
        for p in [pair_zero(2), pair_one(2)] {
            let pp = product_state(&[&p.data, &p.data]);
            let v = crate::CVector::from_vec(pp.clone());
            let out = if p.kind == PairKind::Zero {
                &g.matrix * &v
            } else {
                g.matrix.adjoint() * &v
            };
            let diff: f64 = out.iter().zip(&pp).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
        // |1 1> is also a right fixed point.
        let one = pair_one(2);
        let v = crate::CVector::from_vec(product_state(&[&one.data, &one.data]));
        assert!(((&g.matrix * &v) - &v).camax() < 1e-12);
    }

    #[test]
    fn replicate_identity_and_multiplicativity() {
        let id = replicate_gate(&UnitaryGate::identity(2)).unwrap();
        assert!(max_abs(&(id.matrix - CMatrix::identity(256, 256))) < 1e-15);
        let spec = GateSpec::random(Model::Hrm, 2, 3);
        let u = build_gate(&spec, Position::new(0, 0)).unwrap();
        let v = build_gate(&spec, Position::new(1, 1)).unwrap();
        let uv = UnitaryGate::new(2, &u.matrix * &v.matrix).unwrap();
        let lhs = replicate_gate(&uv).unwrap().matrix;
        let rhs = replicate_gate(&u).unwrap().matrix * replicate_gate(&v).unwrap().matrix;
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
        assert!(replicate_gate(&UnitaryGate::identity(3)).is_err());
    }

    #[test]
    fn copy_factors_match_dense_kron() {
        // In copy-major ordering the replicated gate is a plain Kronecker
        // product; check it against the strided application.
        let u = build_gate(&GateSpec::new(Model::Hrm, 2).with_seed(8), Position::new(0, 0)).unwrap();
        let f = CopyFactors::forward(&u.matrix);
        let dense = f.copy_major();
        let q = 2;
        let perm = |site_idx: usize| {
            // (L1..L4, R1..R4) site-major -> (L1 R1, L2 R2, L3 R3, L4 R4) copy-major.
            let l = site_idx / 16;
            let r = site_idx % 16;
            let mut out = 0;
            for cpy in 0..4 {
                let lc = (l >> (3 - cpy)) & 1;
                let rc = (r >> (3 - cpy)) & 1;
                out = out * 4 + lc * q + rc;
            }
            out
        };
        let g = replicate_gate(&u).unwrap().matrix;
        for (row, col) in [(0, 0), (17, 200), (255, 3), (100, 100), (31, 64)] {
            assert!((g[(row, col)] - dense[(perm(row), perm(col))]).norm() < 1e-12);
        }
        let adj = CopyFactors::adjoint(&u.matrix).copy_major();
        assert!(max_abs(&(adj - dense.adjoint())) < 1e-12);
    }

    #[test]
    fn pauli_basics() {
        let q2x = generalized_pauli(0, 1, 2).unwrap().matrix;
        assert!(max_abs(&(q2x - crate::gates::pauli_x())) < 1e-15);
        assert!(max_abs(&(default_probe(2) - crate::gates::pauli_z())) < 1e-15);
        for q in [2, 3, 4] {
            assert!(max_abs(&(generalized_pauli(0, 0, q).unwrap().matrix - CMatrix::identity(q, q))) < 1e-15);
        }
        assert!(generalized_pauli(2, 0, 2).is_err());
    }

    #[test]
    fn pauli_orthogonality_and_algebra() {
        for q in [2, 3] {
            let omega = std::f64::consts::TAU / q as f64;
            let all: Vec<_> = (0..q * q).map(|mu| GeneralizedPauli::from_mu(mu, q).unwrap()).collect();
            for a in &all {
                for b in &all {
                    let tr = (a.matrix.adjoint() * &b.matrix).trace();
                    let expect = if a.mu() == b.mu() { q as f64 } else { 0.0 };
                    assert!((tr - c(expect)).norm() < 1e-12);
                    let prod = &a.matrix * &b.matrix;
                    let combined = generalized_pauli((a.j + b.j) % q, (a.k + b.k) % q, q).unwrap().matrix;
                    let phase = C64::from_polar(1.0, omega * ((a.j * b.k) % q) as f64);
                    assert!(max_abs(&(prod - combined * phase)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pauli_commutator_identity() {
        for q in [2, 3, 4] {
            for nu in 1..q * q {
                let s_nu = GeneralizedPauli::from_mu(nu, q).unwrap().matrix;
                let total: f64 = (1..q * q)
                    .map(|mu| {
                        let s = GeneralizedPauli::from_mu(mu, q).unwrap().matrix;
                        frobenius_sq(&(&s * &s_nu - &s_nu * &s))
                    })
                    .sum();
                assert!((total - 2.0 * (q as f64).powi(3)).abs() < 1e-9, "q={q} nu={nu}: {total}");
            }
        }
    }

    #[test]
    fn product_helpers_agree() {
        let a: Vec<C64> = (0..3).map(|k| C64::new(k as f64, 1.0)).collect();
        let b: Vec<C64> = (0..2).map(|k| C64::new(1.0, -(k as f64))).collect();
        let v: Vec<C64> = (0..6).map(|k| C64::new(0.5 * k as f64, 0.1)).collect();
        let full = product_state(&[&a, &b]);
        assert!((product_overlap(&[&a, &b], &v) - dot(&full, &v)).norm() < 1e-12);
        let first = contract_first(&v, &a);
        let last = contract_last(&v, &b);
        assert!((dot(&b, &first) - dot(&full, &v)).norm() < 1e-12);
        assert!((dot(&a, &last) - dot(&full, &v)).norm() < 1e-12);
        assert_eq!(prepend_site(&a, &b), full);
        assert_eq!(append_site(&a, &b), full);
    }
}

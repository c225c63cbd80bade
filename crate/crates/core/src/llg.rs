//! Matrix-free light-like generators.
//!
//! Gates in the overlap of the two light cones are labelled by light-like
//! coordinates `(a, b)`; the gate in circuit layer `s` on sites `(i, i+1)`
//! has `a = (s+i)/2`, `b = (s-i)/2`. Gate `(a, b)` takes its left input from
//! the right output of `(a-1, b)` and its right input from the left output of
//! `(a, b-1)`.
//!
//! The left-moving generator advances one row `b`: its `w` legs are the right
//! inputs of gates `a = 0..w-1` (site 0 is `a = 0`), a carry `|0>` enters the
//! left input of `a = 0` and the right output of `a = w-1` is closed with
//! `<1|`. The right-moving generator advances one column `a`: its `τ` legs are
//! the left inputs of gates `b = 1..τ`, stored top first (site 0 is `b = τ`),
//! with a carry `|0>` entering at the bottom and `<1|` closing the top.
//!
//! In random mode the gate at `(a, b)` is drawn at circuit position
//! `(layer a+b, site a-b)`, the same map the brute-force evolution uses.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::gates::{build_gate, Circuit, GateSpec, Position, UnitaryGate};
use crate::linalg::{axpy, dot};
use crate::replica::{
    append_site, apply_replicated, contract_first, contract_last, make_pair_state, pair_one, pair_zero,
    prepend_site, product_overlap, product_state, site_dim, CopyFactors, PairKind,
};
use crate::{CMatrix, Error, Result, C64};

/// Largest dimension [`Llg::dense`] will materialize.
pub const DENSE_LIMIT: usize = 4096;

/// Vectors above this many amplitudes are refused outright.
pub const VECTOR_LIMIT: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftMoving,
    RightMoving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    T,
    F,
}

/// Where the generator gets its gates from.
#[derive(Debug, Clone)]
pub enum GateSource {
    Invariant { forward: CopyFactors, adjoint: CopyFactors },
    Random(GateSpec),
}

impl GateSource {
    pub fn from_gate(gate: &UnitaryGate) -> Self {
        GateSource::Invariant {
            forward: CopyFactors::forward(&gate.matrix),
            adjoint: CopyFactors::adjoint(&gate.matrix),
        }
    }

    pub fn from_spec(spec: &GateSpec) -> Result<Self> {
        Ok(Self::from_circuit(&Circuit::from_spec(spec)?))
    }

    pub fn from_circuit(circuit: &Circuit) -> Self {
        match circuit {
            Circuit::Invariant(g) => Self::from_gate(g),
            Circuit::Random(spec) => GateSource::Random(spec.clone()),
        }
    }

    pub fn q(&self) -> usize {
        match self {
            GateSource::Invariant { forward, .. } => forward.0[0].nrows().isqrt(),
            GateSource::Random(spec) => spec.q,
        }
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self, GateSource::Invariant { .. })
    }

    /// Replicated factors of gate `(a, b)`.
    fn factors(&self, a: i64, b: i64, adjoint: bool) -> Cow<'_, CopyFactors> {
        match self {
            GateSource::Invariant { forward, adjoint: adj } => Cow::Borrowed(if adjoint { adj } else { forward }),
            GateSource::Random(spec) => {
                let g = build_gate(spec, Position::new(a + b, a - b)).expect("spec validated on construction");
                Cow::Owned(if adjoint {
                    CopyFactors::adjoint(&g.matrix)
                } else {
                    CopyFactors::forward(&g.matrix)
                })
            }
        }
    }
}

/// A dense vector on `w` replicated sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaVector {
    pub w: usize,
    pub q: usize,
    pub data: Vec<C64>,
}

impl ReplicaVector {
    pub fn new(w: usize, q: usize, data: Vec<C64>) -> Result<Self> {
        let dim = site_dim(q).pow(w as u32);
        if data.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Self { w, q, data })
    }

    /// Gaussian vector with unit norm.
    pub fn random_unit(w: usize, q: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_unit_vec(site_dim(q).pow(w as u32), &mut rng);
        Self { w, q, data }
    }

    pub fn zeros_power(w: usize, q: usize) -> Self {
        Self { w, q, data: uniform_product(&pair_zero(q).data, w) }
    }

    pub fn ones_power(w: usize, q: usize) -> Self {
        Self { w, q, data: uniform_product(&pair_one(q).data, w) }
    }

    /// Little-endian `f64` pairs `(re, im)`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(w: usize, q: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 16 != 0 {
            return Err(Error::DimensionMismatch {
                expected: bytes.len() / 16 * 16,
                got: bytes.len(),
            });
        }
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                C64::new(re, im)
            })
            .collect();
        Self::new(w, q, data)
    }
}

pub fn random_unit_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let nrm = crate::linalg::norm(&v);
    v.iter_mut().for_each(|z| *z /= nrm);
    v
}

fn uniform_product(site: &[C64], n: usize) -> Vec<C64> {
    let sites: Vec<&[C64]> = vec![site; n];
    product_state(&sites)
}

/// Left- or right-moving generator on `legs` replicated sites.
#[derive(Debug, Clone)]
pub struct Llg {
    pub direction: Direction,
    pub mode: Mode,
    pub q: usize,
    pub legs: usize,
    source: GateSource,
    zero: Vec<C64>,
    one: Vec<C64>,
    step: i64,
}

impl Llg {
    pub fn new(direction: Direction, source: GateSource, legs: usize, mode: Mode) -> Result<Self> {
        let q = source.q();
        if legs == 0 {
            return Err(Error::BadParams("a generator needs at least one leg".into()));
        }
        let dim = (site_dim(q) as u128).pow(legs as u32 + 1);
        if dim > VECTOR_LIMIT as u128 {
            return Err(Error::TooLarge {
                what: "light-like generator workspace",
                dim: usize::try_from(dim).unwrap_or(usize::MAX),
                limit: VECTOR_LIMIT,
            });
        }
        Ok(Self {
            direction,
            mode,
            q,
            legs,
            source,
            zero: pair_zero(q).data,
            one: pair_one(q).data,
            step: 1,
        })
    }

    pub fn left(spec: &GateSpec, w: usize, mode: Mode) -> Result<Self> {
        Self::new(Direction::LeftMoving, GateSource::from_spec(spec)?, w, mode)
    }

    pub fn right(spec: &GateSpec, tau: usize, mode: Mode) -> Result<Self> {
        Self::new(Direction::RightMoving, GateSource::from_spec(spec)?, tau, mode)
    }

    pub fn source(&self) -> &GateSource {
        &self.source
    }

    pub fn dim(&self) -> usize {
        site_dim(self.q).pow(self.legs as u32)
    }

    /// Row `b` (left-moving) or column `a` (right-moving) the next `apply`
    /// will use.
    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn set_step(&mut self, step: i64) {
        self.step = step;
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..self.clone() }
    }

    /// Same source and direction on a different number of legs.
    pub fn resized(&self, legs: usize) -> Result<Self> {
        let mut out = Self::new(self.direction, self.source.clone(), legs, self.mode)?;
        out.step = self.step;
        Ok(out)
    }

    fn check(&self, v: &[C64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn zeros_power(&self) -> Vec<C64> {
        uniform_product(&self.zero, self.legs)
    }

    pub fn ones_power(&self) -> Vec<C64> {
        uniform_product(&self.one, self.legs)
    }

    fn all_sites<'a>(&self, s: &'a [C64]) -> Vec<&'a [C64]> {
        vec![s; self.legs]
    }

    /// One row of gates with explicit carry states, `T`-mode only.
    pub fn sweep(&self, v: &[C64], step: i64, carry_in: &[C64], carry_out: &[C64]) -> Vec<C64> {
        let (q, n) = (self.q, self.legs);
        match self.direction {
            Direction::LeftMoving => {
                let b = step;
                let mut t = prepend_site(carry_in, v);
                for k in 0..n {
                    let f = self.source.factors(k as i64, b, false);
                    apply_replicated(&mut t, q, n + 1, k, k + 1, &f);
                }
                contract_last(&t, carry_out)
            }
            Direction::RightMoving => {
                let a = step;
                let mut t = append_site(v, carry_in);
                for b in 1..=n {
                    let k = n - b + 1;
                    let f = self.source.factors(a, b as i64, false);
                    apply_replicated(&mut t, q, n + 1, k - 1, k, &f);
                }
                contract_first(&t, carry_out)
            }
        }
    }

    /// Adjoint of [`Llg::sweep`] with the same carries.
    pub fn sweep_adjoint(&self, v: &[C64], step: i64, carry_in: &[C64], carry_out: &[C64]) -> Vec<C64> {
        let (q, n) = (self.q, self.legs);
        match self.direction {
            Direction::LeftMoving => {
                let b = step;
                let mut t = append_site(v, carry_out);
                for k in (0..n).rev() {
                    let f = self.source.factors(k as i64, b, true);
                    apply_replicated(&mut t, q, n + 1, k, k + 1, &f);
                }
                contract_first(&t, carry_in)
            }
            Direction::RightMoving => {
                let a = step;
                let mut t = prepend_site(carry_out, v);
                for b in (1..=n).rev() {
                    let k = n - b + 1;
                    let f = self.source.factors(a, b as i64, true);
                    apply_replicated(&mut t, q, n + 1, k - 1, k, &f);
                }
                contract_last(&t, carry_in)
            }
        }
    }

    /// The generator at a given step, without touching the counter.
    pub fn apply_at(&self, v: &[C64], step: i64) -> Result<Vec<C64>> {
        self.check(v)?;
        let mut out = self.sweep(v, step, &self.zero, &self.one);
        if self.mode == Mode::F {
            let c = product_overlap(&self.all_sites(&self.one), v);
            axpy(&mut out, -c, &self.zeros_power());
        }
        Ok(out)
    }

    pub fn apply_adjoint_at(&self, v: &[C64], step: i64) -> Result<Vec<C64>> {
        self.check(v)?;
        let mut out = self.sweep_adjoint(v, step, &self.zero, &self.one);
        if self.mode == Mode::F {
            let c = product_overlap(&self.all_sites(&self.zero), v);
            axpy(&mut out, -c, &self.ones_power());
        }
        Ok(out)
    }

    /// Applies the generator at the current step and advances the counter.
    pub fn apply(&mut self, v: &[C64]) -> Result<Vec<C64>> {
        let out = self.apply_at(v, self.step)?;
        self.step += 1;
        Ok(out)
    }

    /// Steps the counter back and applies the adjoint of that step, so that
    /// `n` applies followed by `n` adjoint applies form `(Fⁿ)†Fⁿ`.
    pub fn apply_adjoint(&mut self, v: &[C64]) -> Result<Vec<C64>> {
        self.step -= 1;
        self.apply_adjoint_at(v, self.step)
    }

    /// Dense matrix of the generator at the current step.
    pub fn dense(&self) -> Result<CMatrix> {
        let n = self.dim();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                what: "dense light-like generator",
                dim: n,
                limit: DENSE_LIMIT,
            });
        }
        let mut m = CMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = self.apply_at(&e, self.step)?;
            for (i, z) in col.into_iter().enumerate() {
                m[(i, j)] = z;
            }
            e[j] = C64::new(0.0, 0.0);
        }
        Ok(m)
    }

    /// Reducibility residuals for `m` sites pinned to the fixed-point
    /// states: `(ket side, bra side)`. Invariant sources only.
    pub fn reduce_check(&self, m: usize, psi: &[C64]) -> Result<(f64, f64)> {
        if !self.source.is_invariant() {
            return Err(Error::BadParams("reducibility needs an invariant gate".into()));
        }
        if m == 0 || m >= self.legs {
            return Err(Error::BadParams(format!("need 1 ≤ m < {}, got {m}", self.legs)));
        }
        let small = self.resized(self.legs - m)?;
        small.check(psi)?;
        let zeros_m = uniform_product(&self.zero, m);
        let ones_m = uniform_product(&self.one, m);
        let step = self.step;
        // Left-moving: pinned |0> sites lead on the ket side and <1| trail on
        // the bra side. Right-moving storage is top-first, so it mirrors.
        let (ket_in, ket_expect, bra_in, bra_expect) = match self.direction {
            Direction::LeftMoving => (
                prepend_site(&zeros_m, psi),
                prepend_site(&zeros_m, &small.apply_at(psi, step)?),
                append_site(psi, &ones_m),
                append_site(&small.apply_adjoint_at(psi, step)?, &ones_m),
            ),
            Direction::RightMoving => (
                append_site(psi, &zeros_m),
                append_site(&small.apply_at(psi, step)?, &zeros_m),
                prepend_site(&ones_m, psi),
                prepend_site(&ones_m, &small.apply_adjoint_at(psi, step)?),
            ),
        };
        let ket = self.apply_at(&ket_in, step)?;
        let bra = self.apply_adjoint_at(&bra_in, step)?;
        Ok((diff_norm(&ket, &ket_expect), diff_norm(&bra, &bra_expect)))
    }
}

fn diff_norm(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Boundary vectors for the OTOC with `σ` at the origin and `ν` at the probe
/// site: `|R_w> = |0_{σ†,σ}> ⊗ |0^{w-1}>`, `<L_w| = <1^{w-1}| ⊗ <1_{ν†,ν}|`.
#[derive(Debug, Clone)]
pub struct BoundaryStates {
    pub q: usize,
    pub sigma: CMatrix,
    pub nu: CMatrix,
    /// `|0_{σ†,σ}>`
    pub bottom: Vec<C64>,
    /// `|1_{ν†,ν}>` stored as a ket.
    pub top: Vec<C64>,
}

impl BoundaryStates {
    pub fn new(q: usize, sigma: &CMatrix, nu: &CMatrix) -> Result<Self> {
        let bottom = make_pair_state(PairKind::Zero, &sigma.adjoint(), sigma, q)?.data;
        let top = make_pair_state(PairKind::One, &nu.adjoint(), nu, q)?.data;
        Ok(Self {
            q,
            sigma: sigma.clone(),
            nu: nu.clone(),
            bottom,
            top,
        })
    }

    pub fn default_probes(q: usize) -> Self {
        let p = crate::replica::default_probe(q);
        Self::new(q, &p, &p).expect("probe has the right shape")
    }

    /// `|R_w>`
    pub fn right_state(&self, w: usize) -> Vec<C64> {
        let zero = pair_zero(self.q).data;
        let mut sites: Vec<&[C64]> = vec![&self.bottom];
        sites.extend(std::iter::repeat_n(zero.as_slice(), w - 1));
        product_state(&sites)
    }

    /// `<L_w|` as a ket.
    pub fn left_state(&self, w: usize) -> Vec<C64> {
        let one = pair_one(self.q).data;
        let mut sites: Vec<&[C64]> = std::iter::repeat_n(one.as_slice(), w - 1).collect();
        sites.push(&self.top);
        product_state(&sites)
    }

    /// `|R̃_τ)`: column `a = 0` fed by `|0>` legs and the decorated carry.
    pub fn right_moving_initial(&self, op: &Llg) -> Vec<C64> {
        let zeros = op.zeros_power();
        op.sweep(&zeros, 0, &self.bottom, &op.one)
    }

    /// `(L̃_τ|v)`: column `a = w-1` closed by the decorated carry and `<1^τ|`.
    pub fn right_moving_final(&self, op: &Llg, v: &[C64], w: usize) -> C64 {
        let out = op.sweep(v, w as i64 - 1, &op.zero, &self.top);
        dot(&op.ones_power(), &out)
    }

    /// `(L̃_τ|` as a ket, so that `(L̃_τ|v) = dot(ket, v)`.
    pub fn right_moving_final_ket(&self, op: &Llg, w: usize) -> Vec<C64> {
        op.sweep_adjoint(&op.ones_power(), w as i64 - 1, &op.zero, &self.top)
    }

    /// `w = 1`: a single column carrying both decorations.
    pub fn single_column(&self, op: &Llg) -> C64 {
        let out = op.sweep(&op.zeros_power(), 0, &self.bottom, &self.top);
        dot(&op.ones_power(), &out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{Arrangement, Model};
    use crate::linalg::norm;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn spec(model: Model, seed: u64) -> GateSpec {
        GateSpec::new(model, 2).with_seed(seed)
    }

    #[test]
    fn fixed_points_for_every_model() {
        for model in Model::ALL {
            for dir in [Direction::LeftMoving, Direction::RightMoving] {
                for w in 1..=3 {
                    let op = Llg::new(dir, GateSource::from_spec(&spec(model, 3)).unwrap(), w, Mode::T).unwrap();
                    let z = op.zeros_power();
                    let o = op.ones_power();
                    assert!(diff_norm(&op.apply_at(&z, 1).unwrap(), &z) < 1e-10, "{model} {dir:?} w={w}");
                    assert!(diff_norm(&op.apply_adjoint_at(&o, 1).unwrap(), &o) < 1e-10);
                    assert!((dot(&o, &z) - c(1.0)).norm() < 1e-12);
                    let f = op.with_mode(Mode::F);
                    assert!(norm(&f.apply_at(&z, 1).unwrap()) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn dense_matches_apply_and_adjoint() {
        let s = spec(Model::Hrm, 7);
        for dir in [Direction::LeftMoving, Direction::RightMoving] {
            for mode in [Mode::T, Mode::F] {
                let op = Llg::new(dir, GateSource::from_spec(&s).unwrap(), 2, mode).unwrap();
                let m = op.dense().unwrap();
                let v = ReplicaVector::random_unit(2, 2, 1).data;
                let dv = &m * crate::CVector::from_vec(v.clone());
                let av = op.apply_at(&v, 1).unwrap();
                assert!(dv.iter().zip(&av).all(|(a, b)| (a - b).norm() < 1e-12));
                let dav = m.adjoint() * crate::CVector::from_vec(v.clone());
                let aav = op.apply_adjoint_at(&v, 1).unwrap();
                assert!(dav.iter().zip(&aav).all(|(a, b)| (a - b).norm() < 1e-12));
            }
        }
    }

    #[test]
    fn adjointness_random_pairs() {
        for q in [2, 3] {
            let s = GateSpec::random(Model::Hrm, q, 5);
            for dir in [Direction::LeftMoving, Direction::RightMoving] {
                let w = if q == 2 { 3 } else { 1 };
                let op = Llg::new(dir, GateSource::from_spec(&s).unwrap(), w, Mode::F).unwrap();
                for seed in 0..3 {
                    let u = ReplicaVector::random_unit(w, q, seed).data;
                    let v = ReplicaVector::random_unit(w, q, seed + 100).data;
                    let lhs = dot(&op.apply_at(&u, 2).unwrap(), &v);
                    let rhs = dot(&u, &op.apply_adjoint_at(&v, 2).unwrap());
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn w1_spectrum_contains_one_and_du_has_two_unit_eigenvalues() {
        let op = Llg::left(&spec(Model::Hrm, 1), 1, Mode::T).unwrap();
        let eig = crate::linalg::eigenvalues(&op.dense().unwrap());
        assert!(eig.iter().any(|z| (z - c(1.0)).norm() < 1e-9));
        assert!(eig.iter().all(|z| z.norm() <= 1.0 + 1e-9));
        let du = Llg::left(&spec(Model::Du, 1), 1, Mode::T).unwrap();
        let ones = du.ones_power();
        // For dual-unitary gates |1> is a right fixed point too.
        assert!(diff_norm(&du.apply_at(&ones, 1).unwrap(), &ones) < 1e-10);
        let zeros = du.zeros_power();
        assert!(diff_norm(&du.apply_adjoint_at(&zeros, 1).unwrap(), &zeros) < 1e-10);
    }

    #[test]
    fn norm_bound_holds_on_random_vectors() {
        for q in [2, 3] {
            let s = GateSpec::new(Model::Hrm, q).with_seed(9);
            let w = if q == 2 { 3 } else { 1 };
            let op = Llg::left(&s, w, Mode::T).unwrap();
            for seed in 0..10 {
                let v = ReplicaVector::random_unit(w, q, seed).data;
                assert!(norm(&op.apply_at(&v, 1).unwrap()) <= q as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn stateful_stepping_in_random_mode() {
        let s = GateSpec::random(Model::Hrm, 2, 4);
        let mut op = Llg::left(&s, 2, Mode::F).unwrap();
        let v = ReplicaVector::random_unit(2, 2, 0).data;
        let a = op.apply(&v).unwrap();
        let b = op.apply(&a).unwrap();
        assert_eq!(op.step(), 3);
        let fresh = Llg::left(&s, 2, Mode::F).unwrap();
        let b2 = fresh.apply_at(&fresh.apply_at(&v, 1).unwrap(), 2).unwrap();
        assert_eq!(b, b2);
        let back = op.apply_adjoint(&b).unwrap();
        assert_eq!(op.step(), 2);
        assert_eq!(back, fresh.apply_adjoint_at(&b, 2).unwrap());
        // Different rows use different gates.
        assert!(diff_norm(&fresh.apply_at(&v, 1).unwrap(), &fresh.apply_at(&v, 2).unwrap()) > 1e-6);
        assert_eq!(s.arrangement, Arrangement::SpatialTemporalRandom);
    }

    #[test]
    fn reducibility() {
        for model in [Model::Hrm, Model::Xyzc, Model::ThreePm] {
            for dir in [Direction::LeftMoving, Direction::RightMoving] {
                let op = Llg::new(dir, GateSource::from_spec(&spec(model, 2)).unwrap(), 3, Mode::F).unwrap();
                for m in 1..3 {
                    let psi = ReplicaVector::random_unit(3 - m, 2, m as u64).data;
                    let (k, b) = op.reduce_check(m, &psi).unwrap();
                    assert!(k < 1e-10 && b < 1e-10, "{model} {dir:?} m={m}: {k} {b}");
                }
            }
        }
    }

    #[test]
    fn boundary_overlaps() {
        for q in [2, 3] {
            let bs = BoundaryStates::default_probes(q);
            for w in 1..=2 {
                let z = uniform_product(&pair_zero(q).data, w);
                let o = uniform_product(&pair_one(q).data, w);
                assert!((dot(&bs.left_state(w), &z) - c(1.0)).norm() < 1e-12);
                assert!((dot(&o, &bs.right_state(w)) - c(1.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn byte_round_trip() {
        let v = ReplicaVector::random_unit(1, 2, 3);
        let bytes = v.to_le_bytes();
        assert_eq!(bytes.len(), 16 * 16);
        assert_eq!(ReplicaVector::from_le_bytes(1, 2, &bytes).unwrap(), v);
        assert!(ReplicaVector::from_le_bytes(2, 2, &bytes).is_err());
    }

    #[test]
    fn dense_guard() {
        let op = Llg::left(&spec(Model::Hrm, 0), 4, Mode::T).unwrap();
        assert!(matches!(op.dense(), Err(Error::TooLarge { .. })));
    }
}

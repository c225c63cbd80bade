//! Two-site gate models and random-matrix samplers.
//!
//! Every model is a `q²×q²` unitary acting on two neighbouring `q`-level sites,
//! with row/column index `q·(left level) + (right level)`. Random models are
//! either drawn once and reused everywhere ([`Arrangement::Invariant`]) or
//! drawn independently for every space-time position
//! ([`Arrangement::SpatialTemporalRandom`]); in the latter case the gate at
//! `(layer, site)` is a pure function of `(seed, layer, site)`.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::{kron, unitarity_residual};
use crate::{CMatrix, Error, Result, C64};

/// Gate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// `exp(i Σ_μ a_μ σ_μ⊗σ_μ)`, integrable.
    Xyzc,
    /// CUE(q²) gate.
    Hrm,
    /// CUE dressings around random two-site phases.
    Rpm,
    /// CUE(2) dressings around an XYZ gate.
    ThreePm,
    /// Block gate built from two COE(2) draws, `Z₂` and time-reversal symmetric.
    Z2Coe,
    /// Dressed XYZ gate at the dual-unitary point `a_x = a_y = π/4`.
    Du,
    /// `CUE(q)⊗CUE(q)`, no coupling between the two sites.
    Localized,
}

impl Model {
    pub const ALL: [Model; 7] = [
        Model::Xyzc,
        Model::Hrm,
        Model::Rpm,
        Model::ThreePm,
        Model::Z2Coe,
        Model::Du,
        Model::Localized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::Xyzc => "xyzc",
            Model::Hrm => "hrm",
            Model::Rpm => "rpm",
            Model::ThreePm => "3pm",
            Model::Z2Coe => "z2coe",
            Model::Du => "du",
            Model::Localized => "localized",
        }
    }

    /// Models that only exist for qubits.
    pub fn requires_qubits(self) -> bool {
        matches!(self, Model::Xyzc | Model::ThreePm | Model::Z2Coe | Model::Du)
    }

    /// Whether the gate involves any random draw.
    pub fn is_random(self) -> bool {
        !matches!(self, Model::Xyzc)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match lower.as_str() {
            "xyzc" | "xyz" => Model::Xyzc,
            "hrm" => Model::Hrm,
            "rpm" => Model::Rpm,
            "3pm" | "threepm" => Model::ThreePm,
            "z2coe" => Model::Z2Coe,
            "du" => Model::Du,
            "localized" | "loc" => Model::Localized,
            _ => return Err(Error::Config(format!("unknown model '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arrangement {
    /// One gate, identical at every position.
    Invariant,
    /// Independent gate per `(layer, site)`.
    SpatialTemporalRandom,
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arrangement::Invariant => "invariant",
            Arrangement::SpatialTemporalRandom => "random",
        })
    }
}

impl FromStr for Arrangement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "invariant" | "inv" => Ok(Arrangement::Invariant),
            "random" | "spatialtemporalrandom" | "spatial-temporal-random" => {
                Ok(Arrangement::SpatialTemporalRandom)
            }
            other => Err(Error::Config(format!("unknown arrangement '{other}'"))),
        }
    }
}

/// Continuous model parameters. `a` is used by XYZc/3PM (all three entries)
/// and DU (only `a[2]`); `epsilon` is the phase variance of the RPM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: [f64; 3],
    pub epsilon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            a: [0.3, 0.4, 0.5],
            epsilon: 1.0,
        }
    }
}

/// Complete description of a gate ensemble and how it is laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub model: Model,
    pub q: usize,
    pub params: ModelParams,
    pub seed: u64,
    pub arrangement: Arrangement,
}

/// A space-time position in the brick-wall circuit: the gate in `layer`
/// acting on sites `(site, site + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Position {
    pub layer: i64,
    pub site: i64,
}

impl Position {
    pub fn new(layer: i64, site: i64) -> Self {
        Self { layer, site }
    }
}

impl GateSpec {
    pub fn new(model: Model, q: usize) -> Self {
        Self {
            model,
            q,
            params: ModelParams::default(),
            seed: 0,
            arrangement: Arrangement::Invariant,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_params(mut self, params: ModelParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_arrangement(mut self, arrangement: Arrangement) -> Self {
        self.arrangement = arrangement;
        self
    }

    pub fn random(model: Model, q: usize, seed: u64) -> Self {
        Self::new(model, q)
            .with_seed(seed)
            .with_arrangement(Arrangement::SpatialTemporalRandom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::BadParams(format!("q must be at least 2, got {}", self.q)));
        }
        if self.model.requires_qubits() && self.q != 2 {
            return Err(Error::WrongQ {
                model: self.model.name(),
                required: 2,
                got: self.q,
            });
        }
        if self.model == Model::Rpm && !(self.params.epsilon >= 0.0) {
            return Err(Error::BadParams(format!(
                "RPM phase variance must be non-negative, got {}",
                self.params.epsilon
            )));
        }
        if self.params.a.iter().any(|a| !a.is_finite()) {
            return Err(Error::BadParams("non-finite coupling".into()));
        }
        Ok(())
    }

    /// Whether gates differ between positions.
    pub fn is_position_dependent(&self) -> bool {
        self.arrangement == Arrangement::SpatialTemporalRandom && self.model.is_random()
    }

    /// Flat `key = value` text form.
    pub fn to_config_string(&self) -> String {
        format!(
            "model = {}\nq = {}\nparams = ax:{}, ay:{}, az:{}, eps:{}\nseed = {}\narrangement = {}\n",
            self.model,
            self.q,
            self.params.a[0],
            self.params.a[1],
            self.params.a[2],
            self.params.epsilon,
            self.seed,
            self.arrangement
        )
    }

    /// Parses the text form produced by [`GateSpec::to_config_string`].
    /// Missing keys fall back to defaults, except `model` and `q`.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut model = None;
        let mut q = None;
        let mut params = ModelParams::default();
        let mut seed = 0;
        let mut arrangement = Arrangement::Invariant;
        for (key, value) in parse_key_values(text)? {
            match key.as_str() {
                "model" => model = Some(value.parse()?),
                "q" => q = Some(parse_num(&key, &value)?),
                "seed" => seed = parse_num(&key, &value)?,
                "arrangement" => arrangement = value.parse()?,
                "params" => params = parse_params(&value, params)?,
                _ => {}
            }
        }
        let model = model.ok_or_else(|| Error::Config("missing key 'model'".into()))?;
        let spec = GateSpec {
            model,
            q: q.unwrap_or(2),
            params,
            seed,
            arrangement,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        out.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

fn parse_params(value: &str, mut params: ModelParams) -> Result<ModelParams> {
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("bad params entry '{item}'")))?;
        let v: f64 = parse_num(k, v.trim())?;
        match k.trim() {
            "ax" => params.a[0] = v,
            "ay" => params.a[1] = v,
            "az" => params.a[2] = v,
            "eps" | "epsilon" => params.epsilon = v,
            other => return Err(Error::Config(format!("unknown parameter '{other}'"))),
        }
    }
    Ok(params)
}

/// A two-site unitary on `q`-level sites.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    pub q: usize,
    pub matrix: CMatrix,
}

impl UnitaryGate {
    pub fn new(q: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.shape() != (q * q, q * q) {
            return Err(Error::DimensionMismatch {
                expected: q * q,
                got: matrix.nrows(),
            });
        }
        Ok(Self { q, matrix })
    }

    pub fn identity(q: usize) -> Self {
        Self {
            q,
            matrix: CMatrix::identity(q * q, q * q),
        }
    }

    pub fn swap(q: usize) -> Self {
        let n = q * q;
        let matrix = CMatrix::from_fn(n, n, |r, c| {
            let (a, b) = (r / q, r % q);
            if c == b * q + a {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { q, matrix }
    }

    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.matrix)
    }

    /// Entry `⟨a b|u|c d⟩`.
    pub fn entry(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        self.matrix[(a * self.q + b, c * self.q + d)]
    }

    /// The gate read in the space direction: `(a,b; c,d) → (a,c; b,d)`.
    pub fn reshuffled(&self) -> CMatrix {
        let q = self.q;
        CMatrix::from_fn(q * q, q * q, |r, c| {
            let (a, cc) = (r / q, r % q);
            let (b, d) = (c / q, c % q);
            self.entry(a, b, cc, d)
        })
    }
}

pub fn pauli_x() -> CMatrix {
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    CMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

pub fn pauli_y() -> CMatrix {
    let (o, i) = (C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    CMatrix::from_row_slice(2, 2, &[o, -i, i, o])
}

pub fn pauli_z() -> CMatrix {
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    CMatrix::from_row_slice(2, 2, &[l, o, o, -l])
}

/// Haar-random `n×n` unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn sample_cue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    assert!(n >= 1, "CUE dimension must be positive");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    });
    let qr = ginibre.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        q.column_mut(j).scale_mut(1.0);
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// COE sample `WᵀW` with `W` drawn from the CUE.
pub fn sample_coe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let w = sample_cue(n, rng);
    w.transpose() * w
}

/// Seed stream for a given position, independent of construction order.
pub fn position_rng(seed: u64, position: Position) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"lightlike-gate");
    hasher.update(seed.to_le_bytes());
    hasher.update(position.layer.to_le_bytes());
    hasher.update(position.site.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha20Rng::from_seed(key)
}

/// `exp(i Σ_μ a_μ σ_μ⊗σ_μ)` through the Bell basis, where all three
/// couplings are diagonal.
pub fn xyz_gate(a: [f64; 3]) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Bell states in the |00>,|01>,|10>,|11> basis with their (XX, YY, ZZ)
    // eigenvalues.
    let bell: [([f64; 4], [f64; 3]); 4] = [
        ([s, 0.0, 0.0, s], [1.0, -1.0, 1.0]),
        ([s, 0.0, 0.0, -s], [-1.0, 1.0, 1.0]),
        ([0.0, s, s, 0.0], [1.0, 1.0, -1.0]),
        ([0.0, s, -s, 0.0], [-1.0, -1.0, -1.0]),
    ];
    let mut u = CMatrix::zeros(4, 4);
    for (vec, eig) in bell.iter() {
        let theta = a[0] * eig[0] + a[1] * eig[1] + a[2] * eig[2];
        let phase = C64::from_polar(1.0, theta);
        for r in 0..4 {
            for c in 0..4 {
                u[(r, c)] += phase * vec[r] * vec[c];
            }
        }
    }
    u
}

fn dressed<R: Rng + ?Sized>(core: &CMatrix, q: usize, rng: &mut R) -> CMatrix {
    let u1 = sample_cue(q, rng);
    let u2 = sample_cue(q, rng);
    let u3 = sample_cue(q, rng);
    let u4 = sample_cue(q, rng);
    kron(&u1, &u2) * core * kron(&u3, &u4)
}

fn draw_gate<R: Rng + ?Sized>(spec: &GateSpec, rng: &mut R) -> CMatrix {
    let q = spec.q;
    match spec.model {
        Model::Xyzc => xyz_gate(spec.params.a),
        Model::Hrm => sample_cue(q * q, rng),
        Model::ThreePm => dressed(&xyz_gate(spec.params.a), 2, rng),
        Model::Du => dressed(&xyz_gate([FRAC_PI_4, FRAC_PI_4, spec.params.a[2]]), 2, rng),
        Model::Rpm => {
            let normal = Normal::new(0.0, spec.params.epsilon.sqrt()).expect("validated variance");
            let phases = DMatrix::from_fn(q * q, q * q, |r, c| {
                if r == c {
                    C64::from_polar(1.0, normal.sample(rng))
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            dressed(&phases, q, rng)
        }
        Model::Z2Coe => {
            let even = sample_coe(2, rng);
            let odd = sample_coe(2, rng);
            let mut u = CMatrix::zeros(4, 4);
            // |00>,|11> block from `even`, |01>,|10> block from `odd`.
            let e = [0usize, 3];
            let o = [1usize, 2];
            for i in 0..2 {
                for j in 0..2 {
                    u[(e[i], e[j])] = even[(i, j)];
                    u[(o[i], o[j])] = odd[(i, j)];
                }
            }
            u
        }
        Model::Localized => kron(&sample_cue(q, rng), &sample_cue(q, rng)),
    }
}

/// The gate at `position`. Invariant arrangements ignore the position.
pub fn build_gate(spec: &GateSpec, position: Position) -> Result<UnitaryGate> {
    spec.validate()?;
    let pos = match spec.arrangement {
        Arrangement::Invariant => Position::new(0, 0),
        Arrangement::SpatialTemporalRandom => position,
    };
    let mut rng = position_rng(spec.seed, pos);
    UnitaryGate::new(spec.q, draw_gate(spec, &mut rng))
}

/// The gates of a whole circuit: one fixed gate or a per-position stream.
#[derive(Debug, Clone)]
pub enum Circuit {
    Invariant(UnitaryGate),
    Random(GateSpec),
}

impl Circuit {
    pub fn from_spec(spec: &GateSpec) -> Result<Self> {
        spec.validate()?;
        if spec.is_position_dependent() {
            Ok(Circuit::Random(spec.clone()))
        } else {
            Ok(Circuit::Invariant(build_gate(spec, Position::new(0, 0))?))
        }
    }

    pub fn q(&self) -> usize {
        match self {
            Circuit::Invariant(g) => g.q,
            Circuit::Random(spec) => spec.q,
        }
    }

    pub fn gate_at(&self, position: Position) -> UnitaryGate {
        match self {
            Circuit::Invariant(g) => g.clone(),
            Circuit::Random(spec) => build_gate(spec, position).expect("spec validated on construction"),
        }
    }
}

/// Tests unitarity of the space-direction reshuffled gate; returns whether
/// it holds to `1e-10` together with the max-entry residual.
pub fn check_dual_unitary(u: &UnitaryGate) -> (bool, f64) {
    let residual = unitarity_residual(&u.reshuffled());
    (residual < 1e-10, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, max_abs};

    fn expm_taylor(m: &CMatrix) -> CMatrix {
        let n = m.nrows();
        let mut term = CMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * m / C64::new(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn xyz_gate_matches_taylor_exponential() {
        let a = [0.3, 0.4, 0.5];
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        let h = kron(&x, &x) * C64::new(a[0], 0.0)
            + kron(&y, &y) * C64::new(a[1], 0.0)
            + kron(&z, &z) * C64::new(a[2], 0.0);
        let expected = expm_taylor(&(h * C64::new(0.0, 1.0)));
        assert!(max_abs(&(xyz_gate(a) - expected)) < 1e-13);
    }

    #[test]
    fn xyz_gate_symmetries() {
        let u = xyz_gate([0.3, 0.4, 0.5]);
        let zz = kron(&pauli_z(), &pauli_z());
        let xx = kron(&pauli_x(), &pauli_x());
        assert!(max_abs(&commutator(&u, &zz)) < 1e-12);
        assert!(max_abs(&commutator(&u, &xx)) < 1e-12);
        assert!(max_abs(&(u.transpose() - &u)) < 1e-12);
        assert!(max_abs(&(xyz_gate([0.0; 3]) - CMatrix::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn cue_one_by_one_is_a_phase() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let u = sample_cue(1, &mut rng);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cue_and_coe_are_unitary_and_coe_symmetric() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for n in [2, 4, 9] {
            assert!(unitarity_residual(&sample_cue(n, &mut rng)) < 1e-12);
            let coe = sample_coe(n, &mut rng);
            assert!(unitarity_residual(&coe) < 1e-12);
            assert!(max_abs(&(coe.transpose() - &coe)) < 1e-12);
        }
    }

    #[test]
    fn every_model_builds_unitary_gates() {
        for model in Model::ALL {
            let q = if model.requires_qubits() { 2 } else { 3 };
            let spec = GateSpec::random(model, q, 11);
            for layer in 0..3 {
                let g = build_gate(&spec, Position::new(layer, 2 * layer - 1)).unwrap();
                assert!(g.unitarity_residual() < 1e-12, "{model}");
            }
        }
    }

    #[test]
    fn wrong_q_and_bad_params_are_rejected() {
        let err = build_gate(&GateSpec::new(Model::ThreePm, 3), Position::new(0, 0));
        assert!(matches!(err, Err(Error::WrongQ { .. })));
        let mut spec = GateSpec::new(Model::Rpm, 2);
        spec.params.epsilon = -1.0;
        assert!(matches!(build_gate(&spec, Position::new(0, 0)), Err(Error::BadParams(_))));
    }

    #[test]
    fn gates_are_position_deterministic() {
        let spec = GateSpec::random(Model::Hrm, 2, 99);
        let a = build_gate(&spec, Position::new(3, -1)).unwrap();
        let b = build_gate(&spec, Position::new(3, -1)).unwrap();
        let c = build_gate(&spec, Position::new(3, 1)).unwrap();
        assert_eq!(a, b);
        assert!(max_abs(&(a.matrix - c.matrix)) > 1e-3);
        let inv = GateSpec::new(Model::Hrm, 2).with_seed(99);
        assert_eq!(
            build_gate(&inv, Position::new(0, 0)).unwrap(),
            build_gate(&inv, Position::new(5, 7)).unwrap()
        );
    }

    #[test]
    fn z2coe_commutes_with_parity() {
        let zz = kron(&pauli_z(), &pauli_z());
        for seed in 0..5 {
            let g = build_gate(&GateSpec::new(Model::Z2Coe, 2).with_seed(seed), Position::new(0, 0)).unwrap();
            assert!(max_abs(&commutator(&g.matrix, &zz)) < 1e-12);
            assert!(max_abs(&(g.matrix.transpose() - &g.matrix)) < 1e-12);
        }
    }

    #[test]
    fn dual_unitarity_checks() {
        for seed in 0..4 {
            let mut spec = GateSpec::new(Model::Du, 2).with_seed(seed);
            spec.params.a[2] = 0.5 + seed as f64 * 0.3;
            let g = build_gate(&spec, Position::new(0, 0)).unwrap();
            let (ok, res) = check_dual_unitary(&g);
            assert!(ok && res < 1e-12, "residual {res}");
        }
        let (ok, res) = check_dual_unitary(&UnitaryGate::new(2, xyz_gate([0.3, 0.4, 0.5])).unwrap());
        assert!(!ok);
        // Residual evaluated numerically once; it is an O(1) violation.
        assert!(res > 0.1, "residual {res}");
        assert!(check_dual_unitary(&UnitaryGate::swap(3)).0);
        assert!(!check_dual_unitary(&UnitaryGate::identity(2)).0);
    }

    #[test]
    fn config_round_trip() {
        let mut spec = GateSpec::random(Model::Rpm, 4, 1234);
        spec.params.epsilon = 0.25;
        let text = spec.to_config_string();
        assert_eq!(GateSpec::from_config_str(&text).unwrap(), spec);
        assert!(GateSpec::from_config_str("q = 2").is_err());
        assert!(GateSpec::from_config_str("model = 3pm\nq = 4").is_err());
    }
}

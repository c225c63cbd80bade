//! Level spacings of the Floquet operator `F = U₂ U₁` of a translation-
//! invariant brick-wall circuit on a ring of `L` sites.
//!
//! Layer 1 acts on bonds `(0,1), (2,3), …`, layer 2 on `(1,2), …, (L−1,0)`.
//! `F` commutes with translation by two sites, so its spectrum splits into
//! momentum sectors `k = 2πm/(L/2)`; qubit chains with a `Πσ_z`-symmetric
//! gate split further by `Z₂` parity. Blocks are built in a basis of
//! translation orbits and diagonalized densely.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gates::{sample_coe, sample_cue, UnitaryGate};
use crate::linalg::{apply_pair, eigenvalues};
use crate::{CMatrix, Error, Result, C64};

/// Largest Hilbert space [`build_floquet`] materializes densely.
pub const DENSE_FLOQUET_LIMIT: usize = 1 << 12;

/// Largest Hilbert space the sector routines accept.
pub const SECTOR_LIMIT: usize = 1 << 14;

fn check_chain(q: usize, l: usize) -> Result<usize> {
    if l < 4 || l % 2 != 0 {
        return Err(Error::BadParams(format!("chain length must be even and ≥ 4, got {l}")));
    }
    let dim = (q as u128).pow(l as u32);
    if dim > SECTOR_LIMIT as u128 {
        return Err(Error::TooLarge {
            what: "Floquet Hilbert space",
            dim: usize::try_from(dim).unwrap_or(usize::MAX),
            limit: SECTOR_LIMIT,
        });
    }
    Ok(dim as usize)
}

/// `F|ψ⟩` without forming `F`.
pub fn apply_floquet(gate: &UnitaryGate, l: usize, psi: &mut [C64]) {
    let q = gate.q;
    for i in (0..l).step_by(2) {
        apply_pair(psi, q, l, i, i + 1, &gate.matrix);
    }
    for i in (1..l).step_by(2) {
        apply_pair(psi, q, l, i, (i + 1) % l, &gate.matrix);
    }
}

/// Dense Floquet matrix, `q^L ≤ 2^12`.
pub fn build_floquet(gate: &UnitaryGate, l: usize) -> Result<CMatrix> {
    let dim = check_chain(gate.q, l)?;
    if dim > DENSE_FLOQUET_LIMIT {
        return Err(Error::TooLarge {
            what: "dense Floquet matrix",
            dim,
            limit: DENSE_FLOQUET_LIMIT,
        });
    }
    let mut m = CMatrix::zeros(dim, dim);
    let mut e = vec![C64::new(0.0, 0.0); dim];
    for j in 0..dim {
        e.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        e[j] = C64::new(1.0, 0.0);
        apply_floquet(gate, l, &mut e);
        m.set_column(j, &nalgebra::DVector::from_column_slice(&e));
    }
    Ok(m)
}

/// Translation by two sites on basis-state indices (site 0 most significant).
fn translate2(idx: usize, q: usize, l: usize) -> usize {
    let q2 = q * q;
    let block = q.pow(l as u32 - 2);
    let (head, tail) = (idx / block, idx % block);
    tail * q2 + head
}

fn z2_parity(idx: usize, l: usize) -> bool {
    (idx & ((1 << l) - 1)).count_ones() % 2 == 0
}

/// Symmetry sector to diagonalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    /// Momentum label `m`, `k = 2πm/(L/2)`.
    pub momentum: usize,
    /// `Some(true)` for the `Πσ_z`-even sector (qubits only).
    pub z2_even: Option<bool>,
}

/// Orthonormal basis of a sector as sparse columns `(index, amplitude)`.
pub fn sector_basis(q: usize, l: usize, sector: Sector) -> Result<Vec<Vec<(usize, C64)>>> {
    let dim = check_chain(q, l)?;
    if sector.z2_even.is_some() && q != 2 {
        return Err(Error::WrongQ {
            model: "Z2 sector",
            required: 2,
            got: q,
        });
    }
    let n = l / 2;
    let k = 2.0 * std::f64::consts::PI * (sector.momentum % n) as f64 / n as f64;
    let mut seen = vec![false; dim];
    let mut basis = Vec::new();
    for r in 0..dim {
        if seen[r] {
            continue;
        }
        let mut orbit = vec![r];
        let mut s = translate2(r, q, l);
        while s != r {
            orbit.push(s);
            s = translate2(s, q, l);
        }
        for &o in &orbit {
            seen[o] = true;
        }
        if let Some(even) = sector.z2_even {
            if z2_parity(r, l) != even {
                continue;
            }
        }
        // A period-p orbit carries momentum k iff e^{ikp} = 1.
        let p = orbit.len();
        let phase = C64::from_polar(1.0, k * p as f64);
        if (phase - C64::new(1.0, 0.0)).norm() > 1e-9 {
            continue;
        }
        let amp = 1.0 / (p as f64).sqrt();
        basis.push(
            orbit
                .iter()
                .enumerate()
                .map(|(j, &o)| (o, C64::from_polar(amp, -k * j as f64)))
                .collect(),
        );
    }
    Ok(basis)
}

/// `B† F B` for a sector basis `B`, checking that the sector is invariant.
pub fn sector_block(gate: &UnitaryGate, l: usize, sector: Sector) -> Result<CMatrix> {
    let dim = check_chain(gate.q, l)?;
    let basis = sector_basis(gate.q, l, sector)?;
    let d = basis.len();
    let mut block = CMatrix::zeros(d, d);
    // Orbits are disjoint, so each basis state owns its indices.
    let mut owner: Vec<Option<(usize, C64)>> = vec![None; dim];
    for (i, col) in basis.iter().enumerate() {
        for &(s, a) in col {
            owner[s] = Some((i, a.conj()));
        }
    }
    let mut leak = 0.0f64;
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for (j, col) in basis.iter().enumerate() {
        v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for &(i, a) in col {
            v[i] = a;
        }
        apply_floquet(gate, l, &mut v);
        let mut column = vec![C64::new(0.0, 0.0); d];
        for (s, z) in v.iter().enumerate() {
            if let Some((i, ac)) = owner[s] {
                column[i] += ac * z;
            }
        }
        let outside: f64 = v
            .iter()
            .zip(&owner)
            .map(|(z, o)| match o {
                Some((i, ac)) => (z - ac.conj() * column[*i]).norm_sqr(),
                None => z.norm_sqr(),
            })
            .sum();
        leak = leak.max(outside.sqrt());
        block.set_column(j, &nalgebra::DVector::from_vec(column));
    }
    if leak > 1e-8 {
        return Err(Error::NotSymmetric { residual: leak });
    }
    Ok(block)
}

/// Sorted eigenphases in `[0, 2π)`.
pub fn eigenphases(m: &CMatrix) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut ph: Vec<f64> = eigenvalues(m).iter().map(|z| z.arg().rem_euclid(tau)).collect();
    ph.sort_by(f64::total_cmp);
    ph
}

/// Nearest-neighbour spacings on the circle, scaled to unit mean.
pub fn unit_mean_spacings(phases: &[f64]) -> Vec<f64> {
    let n = phases.len();
    if n < 2 {
        return Vec::new();
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mean = tau / n as f64;
    let mut s: Vec<f64> = phases.windows(2).map(|w| (w[1] - w[0]) / mean).collect();
    s.push((phases[0] + tau - phases[n - 1]) / mean);
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloquetSpectrum {
    pub l: usize,
    pub sector: Sector,
    pub phases: Vec<f64>,
    pub spacings: Vec<f64>,
}

pub fn sector_spacings(gate: &UnitaryGate, l: usize, sector: Sector) -> Result<FloquetSpectrum> {
    let block = sector_block(gate, l, sector)?;
    let phases = eigenphases(&block);
    let spacings = unit_mean_spacings(&phases);
    Ok(FloquetSpectrum {
        l,
        sector,
        phases,
        spacings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ensemble {
    Cue,
    Coe,
}

/// Spacings of `Sⁿ` for `count` draws of `S` from the ensemble, pooled.
/// The phases of `Sⁿ` are `n` times those of `S`.
pub fn sample_matrix_power_ensemble<R: Rng + ?Sized>(
    kind: Ensemble,
    n_power: usize,
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(dim * count);
    for _ in 0..count {
        let s = match kind {
            Ensemble::Cue => sample_cue(dim, rng),
            Ensemble::Coe => sample_coe(dim, rng),
        };
        let mut ph: Vec<f64> = eigenphases(&s)
            .into_iter()
            .map(|p| (p * n_power as f64).rem_euclid(tau))
            .collect();
        ph.sort_by(f64::total_cmp);
        out.extend(unit_mean_spacings(&ph));
    }
    out
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample KS distance to a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

pub fn poisson_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        1.0 - (-s).exp()
    }
}

/// CDF of the `β = 2` Wigner surmise `(32/π²) s² e^{−4s²/π}`.
pub fn wigner_unitary_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let pi = std::f64::consts::PI;
    libm::erf(2.0 * s / pi.sqrt()) - 4.0 * s / pi * (-4.0 * s * s / pi).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

/// Normalized histogram on `[0, s_max)` with width `bin`.
pub fn histogram(sample: &[f64], bin: f64, s_max: f64) -> Vec<HistogramBin> {
    let nb = (s_max / bin).round() as usize;
    let mut counts = vec![0usize; nb];
    for &s in sample {
        if s >= 0.0 && s < s_max {
            counts[((s / bin) as usize).min(nb - 1)] += 1;
        }
    }
    let n = sample.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistogramBin {
            left: i as f64 * bin,
            right: (i + 1) as f64 * bin,
            density: c as f64 / (n * bin),
        })
        .collect()
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut s = String::from("bin_left,bin_right,density\n");
    for b in bins {
        s.push_str(&format!("{:.3},{:.3},{:.6e}\n", b.left, b.right, b.density));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{build_gate, pauli_z, GateSpec, Model, Position};
    use crate::linalg::{kron, max_abs, unitarity_residual};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gate(model: Model, seed: u64) -> UnitaryGate {
        build_gate(&GateSpec::new(model, 2).with_seed(seed), Position::new(0, 0)).unwrap()
    }

    fn translation2(l: usize) -> CMatrix {
        let dim = 1 << l;
        CMatrix::from_fn(dim, dim, |r, c| {
            if translate2(c, 2, l) == r {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn identity_and_unitarity() {
        let f = build_floquet(&UnitaryGate::identity(2), 6).unwrap();
        assert!(max_abs(&(f - CMatrix::identity(64, 64))) < 1e-15);
        let f = build_floquet(&gate(Model::ThreePm, 1), 8).unwrap();
        assert!(unitarity_residual(&f) < 1e-10);
    }

    #[test]
    fn xyzc_symmetries() {
        let l = 8;
        let f = build_floquet(&gate(Model::Xyzc, 0), l).unwrap();
        let mut z = CMatrix::identity(1, 1);
        for _ in 0..l {
            z = kron(&z, &pauli_z());
        }
        assert!(max_abs(&(&f * &z - &z * &f)) < 1e-10);
        let t = translation2(l);
        assert!(max_abs(&(&f * &t - &t * &f)) < 1e-10);
    }

    #[test]
    fn sectors_partition_the_space() {
        for l in [4usize, 6, 8] {
            let total: usize = (0..l / 2)
                .map(|m| sector_basis(2, l, Sector { momentum: m, z2_even: None }).unwrap().len())
                .sum();
            assert_eq!(total, 1 << l);
            let split: usize = (0..l / 2)
                .flat_map(|m| [true, false].map(|e| (m, e)))
                .map(|(m, e)| sector_basis(2, l, Sector { momentum: m, z2_even: Some(e) }).unwrap().len())
                .sum();
            assert_eq!(split, 1 << l);
        }
    }

    #[test]
    fn projectors_are_idempotent_and_commuting() {
        let l = 6;
        let dim = 1 << l;
        let proj = |m: usize| {
            let b = sector_basis(2, l, Sector { momentum: m, z2_even: None }).unwrap();
            let mut p = CMatrix::zeros(dim, dim);
            for col in &b {
                for &(i, a) in col {
                    for &(j, bb) in col {
                        p[(i, j)] += a * bb.conj();
                    }
                }
            }
            p
        };
        let (p0, p1) = (proj(0), proj(1));
        assert!(max_abs(&(&p1 * &p1 - &p1)) < 1e-10);
        assert!(max_abs(&(&p0 * &p1)) < 1e-10);
        // The Fourier-sum projector agrees with the orbit construction.
        let t = translation2(l);
        let n = l / 2;
        let mut fourier = CMatrix::zeros(dim, dim);
        let mut tj = CMatrix::identity(dim, dim);
        for j in 0..n {
            let ph = C64::from_polar(1.0 / n as f64, -2.0 * std::f64::consts::PI * j as f64 / n as f64);
            fourier += &tj * ph;
            tj = &t * tj;
        }
        assert!(max_abs(&(fourier - p1)) < 1e-10);
    }

    #[test]
    fn sector_spectra_reassemble_full_spectrum() {
        let l = 6;
        let g = gate(Model::ThreePm, 3);
        let mut full = eigenphases(&build_floquet(&g, l).unwrap());
        let mut parts: Vec<f64> = (0..l / 2)
            .flat_map(|m| match sector_spacings(&g, l, Sector { momentum: m, z2_even: None }) { Ok(s) => s.phases, Err(e) => panic!("{e:?}") })
            .collect();
        full.sort_by(f64::total_cmp);
        parts.sort_by(f64::total_cmp);
        assert_eq!(full.len(), parts.len());
        for (a, b) in full.iter().zip(&parts) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn broken_symmetry_is_reported() {
        let g = gate(Model::ThreePm, 2);
        assert!(matches!(
            sector_block(&g, 6, Sector { momentum: 1, z2_even: Some(true) }),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn power_phases_are_multiplied() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_cue(6, &mut rng);
        let tau = 2.0 * std::f64::consts::PI;
        let mut direct = eigenphases(&(&s * &s));
        let mut scaled: Vec<f64> = eigenphases(&s).iter().map(|p| (2.0 * p).rem_euclid(tau)).collect();
        direct.sort_by(f64::total_cmp);
        scaled.sort_by(f64::total_cmp);
        for (a, b) in direct.iter().zip(&scaled) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn spacings_have_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_matrix_power_ensemble(Ensemble::Coe, 2, 30, 4, &mut rng);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cue_matches_wigner_surmise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = sample_matrix_power_ensemble(Ensemble::Cue, 1, 80, 60, &mut rng);
        assert!(ks_one_sample(&s, wigner_unitary_cdf) < 0.03);
        assert!(ks_one_sample(&s, poisson_cdf) > 0.2);
    }

    #[test]
    fn ks_statistics() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert!((ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]) - 1.0).abs() < 1e-15);
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&u, |s| s.clamp(0.0, 1.0)) < 1e-3);
    }

    #[test]
    fn histogram_normalization() {
        let s: Vec<f64> = (0..400).map(|i| i as f64 / 100.0).collect();
        let h = histogram(&s, 0.1, 4.0);
        assert_eq!(h.len(), 40);
        let mass: f64 = h.iter().map(|b| b.density * 0.1).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(histogram_csv(&h).starts_with("bin_left,bin_right,density"));
    }
}

//! Spectral tools for light-like generators: leading singular triplets of
//! `F^τ`, dense spectra with clustered multiplicities, a restarted Arnoldi
//! solver for the subleading eigenvalue, the multiplicity recursion and the
//! large-`τ` tail fit.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gates::GateSpec;
use crate::linalg::{axpy, dot, eigenvalues, norm, scale};
use crate::llg::{Llg, Mode};
use crate::{CMatrix, Error, Result, C64};

/// Default tolerance for merging eigenvalues into one cluster.
pub const DELTA_CLUSTER: f64 = 1e-7;

/// Singular values below this are indistinguishable from rounding noise.
pub const NUMERICAL_ZERO: f64 = 1e-12;

/// A linear map `B` (typically `F^τ`) together with its adjoint.
pub trait PowerOperator {
    fn dim(&self) -> usize;
    fn forward(&self, v: &[C64]) -> Result<Vec<C64>>;
    fn backward(&self, v: &[C64]) -> Result<Vec<C64>>;
}

/// `F_{start+τ-1} ⋯ F_{start}` from a matrix-free generator.
#[derive(Debug, Clone)]
pub struct LlgPower {
    pub op: Llg,
    pub tau: usize,
    pub start: i64,
}

impl LlgPower {
    pub fn new(op: Llg, tau: usize) -> Self {
        let start = op.step();
        Self { op, tau, start }
    }
}

impl PowerOperator for LlgPower {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn forward(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut cur = v.to_vec();
        for s in 0..self.tau as i64 {
            cur = self.op.apply_at(&cur, self.start + s)?;
        }
        Ok(cur)
    }

    fn backward(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut cur = v.to_vec();
        for s in (0..self.tau as i64).rev() {
            cur = self.op.apply_adjoint_at(&cur, self.start + s)?;
        }
        Ok(cur)
    }
}

/// A dense matrix as a [`PowerOperator`].
#[derive(Debug, Clone)]
pub struct DenseOperator(pub CMatrix);

impl PowerOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn forward(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok((&self.0 * DVector::from_column_slice(v)).iter().copied().collect())
    }

    fn backward(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok((self.0.adjoint() * DVector::from_column_slice(v)).iter().copied().collect())
    }
}

#[derive(Debug, Clone)]
pub struct SingularTriplet {
    pub lambda: f64,
    /// Unit left singular vector (output side).
    pub left: Vec<C64>,
    /// Unit right singular vector (input side).
    pub right: Vec<C64>,
    pub iterations: usize,
    /// `‖B† v_L − λ v_R‖ / λ`
    pub residual: f64,
    pub converged: bool,
}

impl SingularTriplet {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                method: "singular power iteration",
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// Start vector: normalized all-ones plus seeded noise.
pub fn start_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(1.0 + 0.1 * re, 0.1 * im)
        })
        .collect();
    let nv = norm(&v);
    scale(&mut v, C64::new(1.0 / nv, 0.0));
    v
}

/// Power iteration on `B†B`.
pub fn leading_singular_triplet(op: &dyn PowerOperator, tol: f64, max_iter: usize, seed: u64) -> Result<SingularTriplet> {
    let n = op.dim();
    let mut v = start_vector(n, seed);
    let mut prev = f64::NAN;
    let mut u = vec![C64::new(0.0, 0.0); n];
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        u = op.forward(&v)?;
        lambda = norm(&u);
        // A nilpotent power leaves only rounding noise; relative convergence
        // is meaningless there.
        if lambda < 1e-300 || (lambda < NUMERICAL_ZERO && prev < NUMERICAL_ZERO) {
            return Ok(SingularTriplet {
                lambda,
                left: u,
                right: v,
                iterations: it,
                residual: 0.0,
                converged: true,
            });
        }
        scale(&mut u, C64::new(1.0 / lambda, 0.0));
        let mut w = op.backward(&u)?;
        let mu = norm(&w);
        scale(&mut w, C64::new(1.0 / mu, 0.0));
        let done = (lambda - prev).abs() <= tol * lambda;
        if done {
            let residual = residual_of(op, &u, &v, lambda)?;
            return Ok(SingularTriplet {
                lambda,
                left: u,
                right: v,
                iterations: it,
                residual,
                converged: true,
            });
        }
        prev = lambda;
        v = w;
    }
    let residual = residual_of(op, &u, &v, lambda)?;
    Ok(SingularTriplet {
        lambda,
        left: u,
        right: v,
        iterations: max_iter,
        residual,
        converged: false,
    })
}

fn residual_of(op: &dyn PowerOperator, u: &[C64], v: &[C64], lambda: f64) -> Result<f64> {
    let mut r = op.backward(u)?;
    axpy(&mut r, C64::new(-lambda, 0.0), v);
    Ok(norm(&r) / lambda)
}

/// Leading singular triplet of a dense matrix via SVD.
pub fn dense_singular_triplet(m: &CMatrix) -> SingularTriplet {
    let svd = m.clone().svd(true, true);
    let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > best {
            best = *s;
            idx = i;
        }
    }
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    let left: Vec<C64> = u.column(idx).iter().copied().collect();
    let right: Vec<C64> = vt.row(idx).iter().map(|z| z.conj()).collect();
    SingularTriplet {
        lambda: best,
        left,
        right,
        iterations: 1,
        residual: 0.0,
        converged: true,
    }
}

/// Power estimate of `‖B‖`.
pub fn norm_estimate(op: &dyn PowerOperator, iterations: usize, seed: u64) -> Result<f64> {
    Ok(leading_singular_triplet(op, 1e-10, iterations, seed)?.lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    #[serde(with = "complex_pair")]
    pub value: C64,
    pub multiplicity: usize,
}

/// Union-find clustering of `|z_i − z_j| < delta`; representatives are the
/// cluster means, sorted by decreasing modulus.
pub fn cluster_eigenvalues(eigs: &[C64], delta: f64) -> Vec<Cluster> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    // Sorting by real part lets the pair scan stop early.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigs[a].re.total_cmp(&eigs[b].re));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if eigs[j].re - eigs[i].re >= delta {
                break;
            }
            if (eigs[i] - eigs[j]).norm() < delta {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (C64, usize)> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        let e = groups.entry(r).or_insert((C64::new(0.0, 0.0), 0));
        e.0 += eigs[i];
        e.1 += 1;
    }
    let mut out: Vec<Cluster> = groups
        .into_values()
        .map(|(s, m)| Cluster {
            value: s / m as f64,
            multiplicity: m,
        })
        .collect();
    out.sort_by(|a, b| {
        b.value
            .norm()
            .total_cmp(&a.value.norm())
            .then(b.value.im.total_cmp(&a.value.im))
    });
    out
}

/// Algebraic multiplicity of `z` in a clustered spectrum.
pub fn multiplicity_of(clusters: &[Cluster], z: C64, delta: f64) -> usize {
    clusters
        .iter()
        .filter(|c| (c.value - z).norm() < delta)
        .map(|c| c.multiplicity)
        .sum()
}

/// The conjugation-closed spectrum gives complex `z₂` in pairs; report the
/// member with non-negative imaginary part.
pub fn canonical(z: C64) -> C64 {
    if z.im < 0.0 {
        z.conj()
    } else {
        z
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(with = "complex_pairs")]
    pub eigenvalues: Vec<C64>,
    pub clusters: Vec<Cluster>,
    #[serde(with = "complex_pair")]
    pub z2: C64,
    pub alpha: Option<f64>,
    pub phi: Option<f64>,
    pub z2_fit: Option<f64>,
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<C64>, delta: f64) -> Self {
        let clusters = cluster_eigenvalues(&eigenvalues, delta);
        Self {
            z2: leading_excluding_one(&eigenvalues),
            eigenvalues,
            clusters,
            alpha: None,
            phi: None,
            z2_fit: None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,multiplicity\n");
        for c in &self.clusters {
            s.push_str(&format!("{:.15e},{:.15e},{}\n", c.value.re, c.value.im, c.multiplicity));
        }
        s
    }
}

/// Largest-modulus eigenvalue once one copy of the unit eigenvalue is removed.
fn leading_excluding_one(eigs: &[C64]) -> C64 {
    let mut v: Vec<C64> = eigs.to_vec();
    if let Some(pos) = v
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - C64::new(1.0, 0.0)).norm().total_cmp(&(b.1 - C64::new(1.0, 0.0)).norm()))
        .map(|(i, _)| i)
    {
        if (v[pos] - C64::new(1.0, 0.0)).norm() < 1e-8 {
            v.remove(pos);
        }
    }
    let best = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)))
        .unwrap_or(C64::new(0.0, 0.0));
    canonical(best)
}

/// Dense spectrum of the generator (`T` or `F` per `mode`).
pub fn eigen_spectrum(op: &Llg, mode: Mode) -> Result<SpectrumReport> {
    let m = op.with_mode(mode).dense()?;
    let eigs = eigenvalues(&m);
    let mut report = SpectrumReport::from_eigenvalues(eigs, DELTA_CLUSTER);
    if mode == Mode::F {
        // F has the unit eigenvalue replaced by zero already.
        report.z2 = canonical(
            report
                .eigenvalues
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)))
                .unwrap_or_default(),
        );
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ArnoldiResult {
    /// Ritz values of the last Krylov space, by decreasing modulus.
    pub ritz: Vec<C64>,
    /// Centroid of the leading Ritz cluster, canonicalized.
    pub leading: C64,
    /// Number of Ritz values merged into the leading cluster.
    pub cluster_size: usize,
    pub restarts: usize,
    /// Largest Ritz residual in the leading cluster.
    pub residual: f64,
    pub converged: bool,
}

/// Options for [`arnoldi`].
#[derive(Debug, Clone, Copy)]
pub struct ArnoldiOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tol: f64,
    /// Radius within which Ritz values count as one (possibly defective)
    /// eigenvalue.
    pub cluster_radius: f64,
    pub seed: u64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 60,
            max_restarts: 200,
            tol: 1e-10,
            cluster_radius: 1e-3,
            seed: 7,
        }
    }
}

struct Factorization {
    basis: Vec<Vec<C64>>,
    h: CMatrix,
    beta: f64,
}

fn arnoldi_factor(apply: &dyn Fn(&[C64]) -> Result<Vec<C64>>, v0: &[C64], m: usize) -> Result<Factorization> {
    let mut basis: Vec<Vec<C64>> = vec![v0.to_vec()];
    let mut h = CMatrix::zeros(m + 1, m);
    let mut beta = 0.0;
    let mut size = m;
    for j in 0..m {
        let mut w = apply(&basis[j])?;
        let wn0 = norm(&w);
        // Modified Gram-Schmidt, then one reorthogonalization pass.
        for pass in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = dot(b, &w);
                axpy(&mut w, -c, b);
                if pass == 0 {
                    h[(i, j)] = c;
                } else {
                    h[(i, j)] += c;
                }
            }
        }
        let wn = norm(&w);
        h[(j + 1, j)] = C64::new(wn, 0.0);
        beta = wn;
        if wn <= 1e-13 * wn0.max(1e-300) {
            size = j + 1;
            beta = 0.0;
            break;
        }
        if j + 1 < m {
            scale(&mut w, C64::new(1.0 / wn, 0.0));
            basis.push(w);
        }
    }
    basis.truncate(size);
    Ok(Factorization {
        basis,
        h: h.view((0, 0), (size, size)).into_owned(),
        beta,
    })
}

/// Eigenvector of a small dense matrix for a known eigenvalue, by inverse
/// iteration with a tiny shift.
fn small_eigenvector(h: &CMatrix, theta: C64) -> DVector<C64> {
    let n = h.nrows();
    let shift = theta + C64::new(1e-10 * (1.0 + theta.norm()), 1e-10);
    let a = h - CMatrix::identity(n, n) * shift;
    let lu = a.lu();
    let mut y = DVector::from_element(n, C64::new(1.0, 0.0));
    for _ in 0..3 {
        if let Some(s) = lu.solve(&y) {
            let nn = s.norm();
            y = s / C64::new(nn, 0.0);
        }
    }
    y
}

/// Leading eigenvalue of a matrix-free operator by explicitly restarted
/// Arnoldi. Restarts from the sum of the Ritz vectors of the leading cluster
/// and a few of its neighbours.
pub fn arnoldi(apply: &dyn Fn(&[C64]) -> Result<Vec<C64>>, dim: usize, opts: ArnoldiOptions) -> Result<ArnoldiResult> {
    let r = arnoldi_unchecked(apply, dim, opts)?;
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NoConvergence {
            method: "restarted Arnoldi",
            iterations: r.restarts,
            residual: r.residual,
        })
    }
}

/// [`arnoldi`] without the convergence requirement: returns the state after
/// the last restart with `converged` set accordingly.
pub fn arnoldi_unchecked(
    apply: &dyn Fn(&[C64]) -> Result<Vec<C64>>,
    dim: usize,
    opts: ArnoldiOptions,
) -> Result<ArnoldiResult> {
    let m = opts.krylov_dim.min(dim).max(2);
    let mut v0 = start_vector(dim, opts.seed);
    let mut prev = C64::new(f64::NAN, 0.0);
    let mut last = None;
    for restart in 0..opts.max_restarts {
        let fac = arnoldi_factor(apply, &v0, m)?;
        let k = fac.h.nrows();
        let mut ritz = eigenvalues(&fac.h);
        ritz.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
        let top = canonical(ritz[0]);
        let members: Vec<C64> = ritz
            .iter()
            .copied()
            .filter(|z| (canonical(*z) - top).norm() < opts.cluster_radius)
            .collect();
        let upper: Vec<C64> = members.iter().copied().filter(|z| z.im >= -1e-14).collect();
        let pool = if upper.is_empty() { &members } else { &upper };
        let centroid = canonical(pool.iter().sum::<C64>() / pool.len() as f64);

        // Restart vector and residuals from the leading few Ritz vectors.
        let keep = (members.len() + 4).min(k);
        let mut next = vec![C64::new(0.0, 0.0); dim];
        let mut worst = 0.0f64;
        for (idx, theta) in ritz.iter().take(keep).enumerate() {
            let y = small_eigenvector(&fac.h, *theta);
            if idx < members.len() {
                worst = worst.max(fac.beta * y[k - 1].norm());
            }
            for (b, yi) in fac.basis.iter().zip(y.iter()) {
                axpy(&mut next, *yi, b);
            }
        }
        let nn = norm(&next);
        let change = (centroid - prev).norm();
        last = Some(ArnoldiResult {
            ritz: ritz.clone(),
            leading: centroid,
            cluster_size: pool.len(),
            restarts: restart + 1,
            residual: worst,
            converged: false,
        });
        if fac.beta == 0.0 || change < opts.tol || (worst < opts.tol && restart > 0) {
            let mut r = last.unwrap();
            r.converged = true;
            return Ok(r);
        }
        prev = centroid;
        if nn < 1e-300 {
            break;
        }
        scale(&mut next, C64::new(1.0 / nn, 0.0));
        v0 = next;
    }
    Ok(last.expect("at least one restart"))
}

/// `z₂(w)`: leading eigenvalue of the left-moving `F_w` of an invariant
/// circuit. Dense for `w = 1`, Arnoldi otherwise.
pub fn subleading_eigenvalue(spec: &GateSpec, w: usize) -> Result<C64> {
    if spec.is_position_dependent() {
        return Err(Error::BadParams("z₂ is defined for invariant circuits".into()));
    }
    let op = Llg::left(spec, w, Mode::F)?;
    if w == 1 {
        return Ok(eigen_spectrum(&op, Mode::F)?.z2);
    }
    let apply = |v: &[C64]| op.apply_at(v, 1);
    Ok(arnoldi(&apply, op.dim(), ArnoldiOptions::default())?.leading)
}

/// One row of the multiplicity recursion `ã(z,w) = a(z,w) − 2a(z,w−1) + a(z,w−2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionRow {
    #[serde(with = "complex_pair")]
    pub z: C64,
    pub a_w: usize,
    pub a_w1: usize,
    pub a_w2: usize,
    pub a_tilde: i64,
    /// Whether `z` already appears in the spectrum at `w − 1`.
    pub inherited: bool,
}

/// Evaluates the recursion for every cluster of the width-`w` spectrum and
/// for any extra probe values.
pub fn recursion_check(
    spec_w2: &[Cluster],
    spec_w1: &[Cluster],
    spec_w: &[Cluster],
    probes: &[C64],
    delta: f64,
) -> Vec<RecursionRow> {
    let mut zs: Vec<C64> = spec_w.iter().map(|c| c.value).collect();
    zs.extend_from_slice(probes);
    zs.into_iter()
        .map(|z| {
            let a_w = multiplicity_of(spec_w, z, delta);
            let a_w1 = multiplicity_of(spec_w1, z, delta);
            let a_w2 = multiplicity_of(spec_w2, z, delta);
            RecursionRow {
                z,
                a_w,
                a_w1,
                a_w2,
                a_tilde: a_w as i64 - 2 * a_w1 as i64 + a_w2 as i64,
                inherited: a_w1 > 0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub z2: f64,
    pub phi: f64,
    pub constant: f64,
    /// First `τ` of the fitted window.
    pub tau_start: f64,
    pub points: usize,
    pub rms: f64,
}

fn fit_once(data: &[(f64, f64)]) -> Option<(f64, f64, f64, f64)> {
    let n = data.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => data[i].0.ln(),
        1 => data[i].0,
        _ => 1.0,
    });
    let b = DVector::from_iterator(n, data.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).ok()?;
    let r = &a * &x - &b;
    let rms = (r.norm_squared() / n as f64).sqrt();
    Some((x[0], x[1], x[2], rms))
}

/// Fits `ln|C| = φ ln τ + τ ln z + c` on the largest suffix of `(τ, ln|C|)`
/// samples whose RMS residual is below `max_rms`.
pub fn tail_fit(series: &[(f64, f64)], min_points: usize, max_rms: f64) -> Result<TailFit> {
    let data: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, l)| *t > 0.0 && l.is_finite())
        .collect();
    if data.len() < min_points {
        return Err(Error::InsufficientTail {
            needed: min_points,
            got: data.len(),
        });
    }
    for start in 0..=data.len() - min_points {
        if let Some((phi, lnz, c, rms)) = fit_once(&data[start..]) {
            if rms < max_rms {
                return Ok(TailFit {
                    z2: lnz.exp(),
                    phi,
                    constant: c,
                    tau_start: data[start].0,
                    points: data.len() - start,
                    rms,
                });
            }
        }
    }
    Err(Error::InsufficientTail {
        needed: min_points,
        got: 0,
    })
}

mod complex_pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

mod complex_pairs {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::Model;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn clustering_merges_close_values() {
        let eigs = [c(1.0), c(0.5), c(0.5 + 1e-9), C64::new(0.2, 0.1), C64::new(0.2, -0.1)];
        let cl = cluster_eigenvalues(&eigs, DELTA_CLUSTER);
        assert_eq!(cl.len(), 4);
        assert_eq!(cl[0].multiplicity, 1);
        assert_eq!(cl[1].multiplicity, 2);
        assert_eq!(cl.iter().map(|c| c.multiplicity).sum::<usize>(), 5);
        assert_eq!(multiplicity_of(&cl, c(0.5), 1e-6), 2);
        assert_eq!(multiplicity_of(&cl, c(0.3), 1e-6), 0);
    }

    #[test]
    fn dense_triplet_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = CMatrix::from_fn(12, 12, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, 0.3 * re)
        });
        let dense = dense_singular_triplet(&m);
        let op = DenseOperator(m.clone());
        let pi = leading_singular_triplet(&op, 1e-13, 5000, 1).unwrap();
        assert!(pi.converged);
        assert!((pi.lambda - dense.lambda).abs() < 1e-8 * dense.lambda);
        let mv = op.forward(&pi.right).unwrap();
        let r: f64 = mv
            .iter()
            .zip(&pi.left)
            .map(|(a, b)| (a - b * pi.lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(r < 1e-10 * pi.lambda);
        assert!(pi.residual < 1e-5);
    }

    #[test]
    fn localized_singular_values() {
        let spec = GateSpec::new(Model::Localized, 2).with_seed(4);
        let op = Llg::left(&spec, 3, Mode::F).unwrap();
        let two = leading_singular_triplet(&LlgPower::new(op.clone(), 2), 1e-12, 500, 0).unwrap();
        assert!((two.lambda - 8.0).abs() < 1e-8);
        let three = leading_singular_triplet(&LlgPower::new(op, 3), 1e-12, 500, 0).unwrap();
        assert!(three.lambda < 1e-9);
    }

    #[test]
    fn du_singular_value_is_q_to_the_w() {
        let spec = GateSpec::new(Model::Du, 2).with_seed(2);
        for (w, tau) in [(1, 1), (2, 3), (3, 2)] {
            let op = Llg::left(&spec, w, Mode::F).unwrap();
            let t = leading_singular_triplet(&LlgPower::new(op, tau), 1e-13, 2000, 0).unwrap();
            assert!((t.lambda / 2f64.powi(w as i32) - 1.0).abs() < 1e-9, "w={w} τ={tau}: {}", t.lambda);
        }
    }

    #[test]
    fn hrm_w1_spectrum() {
        let spec = GateSpec::new(Model::Hrm, 2).with_seed(1);
        let op = Llg::left(&spec, 1, Mode::T).unwrap();
        let rep = eigen_spectrum(&op, Mode::T).unwrap();
        assert_eq!(rep.eigenvalues.len(), 16);
        assert_eq!(rep.clusters.iter().map(|c| c.multiplicity).sum::<usize>(), 16);
        assert!(rep.eigenvalues.iter().all(|z| z.norm() <= 1.0 + 1e-9));
        assert_eq!(rep.eigenvalues.iter().filter(|z| (*z - c(1.0)).norm() < 1e-9).count(), 1);
        assert!(rep.z2.norm() < 1.0);
        let f = eigen_spectrum(&op, Mode::F).unwrap();
        assert!((f.z2 - rep.z2).norm() < 1e-9);
    }

    #[test]
    fn identity_gate_spectrum_on_unit_circle() {
        let src = crate::llg::GateSource::from_gate(&crate::gates::UnitaryGate::identity(2));
        let op = Llg::new(crate::llg::Direction::LeftMoving, src, 2, Mode::T).unwrap();
        let rep = eigen_spectrum(&op, Mode::T).unwrap();
        assert!(rep.eigenvalues.iter().all(|z| z.norm() < 1.0 + 1e-9));
        // The identity gate moves legs along the row: T is a partial shift,
        // so everything except the pair sector is nilpotent.
        assert!(rep.eigenvalues.iter().any(|z| (z - c(1.0)).norm() < 1e-9));
    }

    #[test]
    fn arnoldi_finds_dense_leading_eigenvalue() {
        let spec = GateSpec::new(Model::Hrm, 2).with_seed(12);
        let op = Llg::left(&spec, 2, Mode::F).unwrap();
        let dense = eigen_spectrum(&op, Mode::F).unwrap().z2;
        let apply = |v: &[C64]| op.apply_at(v, 1);
        let res = arnoldi(&apply, op.dim(), ArnoldiOptions::default()).unwrap();
        assert!((res.leading - dense).norm() < 1e-6, "{} vs {}", res.leading, dense);
    }

    #[test]
    fn recursion_rows() {
        let cl = |v: &[(f64, usize)]| -> Vec<Cluster> {
            v.iter()
                .map(|&(z, m)| Cluster {
                    value: c(z),
                    multiplicity: m,
                })
                .collect()
        };
        let rows = recursion_check(
            &cl(&[(1.0, 1), (0.8, 2)]),
            &cl(&[(1.0, 1), (0.8, 3)]),
            &cl(&[(1.0, 1), (0.8, 4)]),
            &[c(0.123)],
            1e-7,
        );
        assert_eq!(rows[1].a_tilde, 0);
        assert!(rows[1].inherited);
        assert_eq!(rows[2].a_tilde, 0);
        assert!(!rows[2].inherited);
    }

    #[test]
    fn tail_fit_recovers_synthetic_law() {
        let series: Vec<(f64, f64)> = (1..200)
            .map(|t| {
                let t = t as f64;
                let exact = 3.0 * t.ln() + t * 0.8f64.ln() + 0.5;
                // Early-time plateau that the window must drop.
                let v = if t < 20.0 { 0.0 } else { exact };
                (t, v)
            })
            .collect();
        let fit = tail_fit(&series, 8, 0.05).unwrap();
        assert!((fit.phi - 3.0).abs() < 1e-6 && (fit.z2 - 0.8).abs() < 1e-8);
        assert!(fit.tau_start >= 20.0);
        assert!(matches!(tail_fit(&series[..5], 8, 0.05), Err(Error::InsufficientTail { .. })));
    }

    #[test]
    fn report_serializes_as_pairs() {
        let rep = SpectrumReport::from_eigenvalues(vec![c(1.0), C64::new(0.5, 0.25)], 1e-7);
        let js = serde_json::to_string(&rep).unwrap();
        assert!(js.contains("[0.5,0.25]"));
        let back: SpectrumReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back.eigenvalues, rep.eigenvalues);
        assert!((rep.z2 - C64::new(0.5, 0.25)).norm() < 1e-15);
    }
}

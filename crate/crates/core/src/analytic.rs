//! Closed forms: Weingarten averages, the ensemble-averaged Haar generator
//! on the pair-state span, the restricted lower-triangular matrix `T′_w`,
//! the butterfly-cone integral `f_τ`, and the dual-unitary and localized
//! special cases.
//!
//! The averaged generator acts on coordinates `c` of vectors
//! `Σ_σ c_σ |σ_0 … σ_{w−1}⟩` in the (non-orthogonal) product basis of pair
//! states, whose single-site Gram matrix is `G = [[q, 1], [1, q]]`.

use nalgebra::DMatrix;

use crate::gates::{GateSpec, Model};
use crate::linalg::{apply_pair, dot, kron, norm};
use crate::llg::{BoundaryStates, Llg, Mode};
use crate::otoc::{embed_left, embed_right, normalized, variational_product};
use crate::replica::{pair_one, pair_zero, product_state};
use crate::spectral::{dense_singular_triplet, DenseOperator, SingularTriplet};
use crate::{CMatrix, Error, Result, C64};

/// Largest `w` for which the averaged generator is materialized densely.
pub const AVERAGED_DENSE_MAX_W: usize = 12;

/// Largest `w` for matrix-free use of the averaged generator.
pub const AVERAGED_MAX_W: usize = 20;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Two-element Weingarten function `Wg(i, j, N)` for permutations of two
/// objects labelled `0` (identity) and `1` (swap).
pub fn weingarten(i: usize, j: usize, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::BadParams(format!("Weingarten needs N ≥ 2, got {n}")));
    }
    let n = n as f64;
    Ok(if i == j {
        1.0 / (n * n - 1.0)
    } else {
        -1.0 / (n * (n * n - 1.0))
    })
}

/// Single-site Gram matrix of `{|0⟩, |1⟩}`.
pub fn gram(q: usize) -> [[f64; 2]; 2] {
    let q = q as f64;
    [[q, 1.0], [1.0, q]]
}

/// `M^{i₁i₂}_{j₁j₂}`: the averaged replicated gate maps `|j₁ j₂⟩` to
/// `Σ M^{i₁i₂}_{j₁j₂} |i₁ i₂⟩`, nonzero only for `i₁ = i₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedMTensor {
    pub q: usize,
    pub entries: [[[[f64; 2]; 2]; 2]; 2],
}

impl AveragedMTensor {
    pub fn new(q: usize) -> Result<Self> {
        let n = q * q;
        let g = gram(q);
        let qf = q as f64;
        let mut entries = [[[[0.0; 2]; 2]; 2]; 2];
        for s in 0..2 {
            for h in 0..2 {
                for r in 0..2 {
                    let mut m = 0.0;
                    for p in 0..2 {
                        m += weingarten(s, p, n)? * g[p][h] * g[p][r];
                    }
                    m *= qf * qf;
                    // Cancellations leave rounding dust where the exact
                    // entry is zero.
                    if m.abs() < 1e-14 {
                        m = 0.0;
                    }
                    entries[s][s][h][r] = m;
                }
            }
        }
        Ok(Self { q, entries })
    }

    pub fn get(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> f64 {
        self.entries[i1][i2][j1][j2]
    }

    /// The tensor as a `4×4` matrix with index `2·(left) + right`.
    pub fn gate_matrix(&self) -> CMatrix {
        CMatrix::from_fn(4, 4, |r, col| c(self.entries[r / 2][r % 2][col / 2][col % 2]))
    }
}

/// Ensemble-averaged left-moving generator of the Haar-random circuit,
/// restricted to the pair-state span.
#[derive(Debug, Clone)]
pub struct AveragedHrm {
    pub q: usize,
    pub w: usize,
    gate: CMatrix,
    g1: [f64; 2],
}

impl AveragedHrm {
    pub fn new(q: usize, w: usize) -> Result<Self> {
        if w == 0 || w > AVERAGED_MAX_W {
            return Err(Error::TooLarge {
                what: "averaged generator width",
                dim: w,
                limit: AVERAGED_MAX_W,
            });
        }
        let m = AveragedMTensor::new(q)?;
        let g = gram(q);
        Ok(Self {
            q,
            w,
            gate: m.gate_matrix(),
            g1: g[1],
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.w
    }

    /// `T` on coordinates: prepend the `|0⟩` carry, sweep, close with `⟨1|`.
    pub fn apply_t(&self, v: &[C64]) -> Vec<C64> {
        let w = self.w;
        let mut t = vec![c(0.0); 2 * v.len()];
        t[..v.len()].copy_from_slice(v);
        for k in 0..w {
            apply_pair(&mut t, 2, w + 1, k, k + 1, &self.gate);
        }
        t.chunks(2).map(|p| p[0] * self.g1[0] + p[1] * self.g1[1]).collect()
    }

    /// `⟨1^w|` as a functional on coordinates.
    pub fn ones_functional(&self) -> Vec<C64> {
        (0..self.dim())
            .map(|j| c((0..self.w).map(|a| self.g1[bit(j, a, self.w)]).product()))
            .collect()
    }

    /// `F = T − |0^w⟩⟨1^w|` on coordinates.
    pub fn apply_f(&self, v: &[C64]) -> Vec<C64> {
        let mut out = self.apply_t(v);
        let s: C64 = self.ones_functional().iter().zip(v).map(|(g, x)| g * x).sum();
        out[0] -= s;
        out
    }

    pub fn dense(&self, mode: Mode) -> Result<CMatrix> {
        if self.w > AVERAGED_DENSE_MAX_W {
            return Err(Error::TooLarge {
                what: "dense averaged generator",
                dim: self.dim(),
                limit: 1 << AVERAGED_DENSE_MAX_W,
            });
        }
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        let mut e = vec![c(0.0); n];
        for j in 0..n {
            e[j] = c(1.0);
            let col = match mode {
                Mode::T => self.apply_t(&e),
                Mode::F => self.apply_f(&e),
            };
            m.set_column(j, &nalgebra::DVector::from_vec(col));
            e[j] = c(0.0);
        }
        Ok(m)
    }

    /// Coordinates of `|R_w⟩` for a traceless unitary probe: the decorated
    /// site only enters through `⟨0|·⟩ = 0`, `⟨1|·⟩ = 1`.
    pub fn right_coords(&self) -> Vec<C64> {
        let q = self.q as f64;
        let mut v = vec![c(0.0); self.dim()];
        let top = 1 << (self.w - 1);
        v[0] = c(-1.0 / (q * q - 1.0));
        v[top] = c(q / (q * q - 1.0));
        v
    }

    /// `⟨L_w|` on coordinates: `Π_{a<w−1} G(1, σ_a) · δ_{σ_{w−1}, 0}`.
    pub fn left_functional(&self) -> Vec<C64> {
        let w = self.w;
        (0..self.dim())
            .map(|j| {
                if bit(j, w - 1, w) != 0 {
                    c(0.0)
                } else {
                    c((0..w - 1).map(|a| self.g1[bit(j, a, w)]).product())
                }
            })
            .collect()
    }

    /// `C(w, τ)` for `τ = 1..=tau_max`.
    pub fn otoc_series(&self, tau_max: usize) -> Vec<f64> {
        let l = self.left_functional();
        let mut v = self.right_coords();
        (0..tau_max)
            .map(|_| {
                v = self.apply_f(&v);
                -l.iter().zip(&v).map(|(a, b)| a * b).sum::<C64>().re
            })
            .collect()
    }

    /// `S = (G^{1/2})^{⊗w}`: coordinates to orthonormal coordinates.
    pub fn sqrt_gram(&self) -> CMatrix {
        let s1 = sqrt_gram_site(self.q);
        let mut s = CMatrix::identity(1, 1);
        for _ in 0..self.w {
            s = kron(&s, &s1);
        }
        s
    }

    /// `S F^τ S⁻¹`, the matrix of `F^τ` in an orthonormal basis of the span.
    pub fn orthonormal_power(&self, tau: usize) -> Result<CMatrix> {
        let f = self.dense(Mode::F)?;
        let s = self.sqrt_gram();
        let s_inv = s.clone().try_inverse().expect("Gram matrix is positive definite");
        let mut p = CMatrix::identity(self.dim(), self.dim());
        for _ in 0..tau {
            p = &f * p;
        }
        Ok(&s * p * s_inv)
    }

    /// Boundary vectors in orthonormal coordinates, `(ℓ, r)` with
    /// `C = −ℓ† B^τ r`.
    fn orthonormal_boundaries(&self) -> (Vec<C64>, Vec<C64>) {
        let s = self.sqrt_gram();
        let s_inv = s.clone().try_inverse().expect("Gram matrix is positive definite");
        let l = &s_inv * nalgebra::DVector::from_vec(self.left_functional());
        let r = &s * nalgebra::DVector::from_vec(self.right_coords());
        (l.iter().copied().collect(), r.iter().copied().collect())
    }

    /// LSVA value and the triplet of `F^τ` in orthonormal coordinates.
    pub fn lsva(&self, tau: usize) -> Result<(f64, SingularTriplet)> {
        let b = self.orthonormal_power(tau)?;
        let tr = dense_singular_triplet(&b);
        let (l, r) = self.orthonormal_boundaries();
        let v = -tr.lambda * dot(&l, &tr.left) * dot(&tr.right, &r);
        Ok((v.re, tr))
    }

    /// Product-ansatz optimum in the span; returns `(C_var, overlap with
    /// the exact singular pair)`.
    pub fn variational(&self, tau: usize, max_sweeps: usize) -> Result<(f64, f64)> {
        let b = self.orthonormal_power(tau)?;
        let exact = dense_singular_triplet(&b);
        let s1 = sqrt_gram_site(self.q);
        let site = |k: usize| normalized(s1.column(k).iter().copied().collect());
        let (zhat, ohat) = (site(0), site(1));
        let (l, r) = self.orthonormal_boundaries();
        let start: Vec<C64> = {
            let q = self.q as f64;
            let cvec = nalgebra::DVector::from_vec(vec![c(-1.0), c(q)]);
            (&s1 * cvec).iter().copied().collect()
        };
        let w = self.w;
        let opt = variational_product(&DenseOperator(b), w, &zhat, &ohat, start, max_sweeps)?;
        let lam_l = embed_left(&zhat, w, &opt.v_left);
        let lam_r = embed_right(&ohat, w, &opt.v_right);
        let value = -opt.rayleigh * dot(&l, &lam_l) * dot(&lam_r, &r);
        let overlap = (dot(&lam_l, &exact.left) * dot(&exact.right, &lam_r)).norm();
        Ok((value.re, overlap))
    }
}

fn sqrt_gram_site(q: usize) -> CMatrix {
    let (a, b) = (((q + 1) as f64).sqrt(), ((q - 1) as f64).sqrt());
    CMatrix::from_row_slice(2, 2, &[c((a + b) / 2.0), c((a - b) / 2.0), c((a - b) / 2.0), c((a + b) / 2.0)])
}

/// Digit of site `a` in a `w`-site index, site 0 most significant.
fn bit(j: usize, a: usize, w: usize) -> usize {
    (j >> (w - 1 - a)) & 1
}

/// Dense averaged generator, `2^w × 2^w`.
pub fn averaged_llg(q: usize, w: usize) -> Result<CMatrix> {
    AveragedHrm::new(q, w)?.dense(Mode::T)
}

/// A basis order in which `m` is upper triangular, found by topologically
/// sorting its off-diagonal pattern (`|m_ij| > tol`).
pub fn triangular_order(m: &CMatrix, tol: f64) -> Result<Vec<usize>> {
    let n = m.nrows();
    // An entry (i, j) forces i before j.
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > tol {
                succ[i].push(j);
                indeg[j] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(j);
            }
        }
    }
    if order.len() != n {
        return Err(Error::BadParams("matrix is not permutation-triangular".into()));
    }
    Ok(order)
}

/// Largest strictly-lower entry of `m` in the given order.
pub fn lower_residual(m: &CMatrix, order: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (pi, &i) in order.iter().enumerate() {
        for &j in &order[..pi] {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

/// Eigenvalues of a permutation-triangular matrix, read off its diagonal.
pub fn triangular_eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let order = triangular_order(m, 0.0)?;
    debug_assert_eq!(lower_residual(m, &order), 0.0);
    Ok(order.iter().map(|&i| m[(i, i)]).collect())
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    ln_binomial(n, k).exp()
}

/// `ln C(n, k)` as a sum of logs.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `(ε_n, C(w, n))` for `n = 0..=w`: `ε_n = κ^n` (even `n`), `q κ^n` (odd),
/// `κ = q/(q²+1)`.
pub fn hrm_eigenvalues(q: usize, w: usize) -> Vec<(f64, usize)> {
    let qf = q as f64;
    let kappa = qf / (qf * qf + 1.0);
    (0..=w)
        .map(|n| {
            let e = kappa.powi(n as i32) * if n % 2 == 1 { qf } else { 1.0 };
            (e, binomial(w as u64, n as u64).round() as usize)
        })
        .collect()
}

pub fn z2_hrm(q: usize) -> f64 {
    let q2 = (q * q) as f64;
    q2 / (q2 + 1.0)
}

pub fn butterfly_velocity(q: usize) -> f64 {
    let q2 = (q * q) as f64;
    (q2 - 1.0) / (q2 + 1.0)
}

/// Front width `σ(t) = 2q√t/(q²+1)`.
pub fn front_width(q: usize, t: f64) -> f64 {
    let qf = q as f64;
    2.0 * qf * t.sqrt() / (qf * qf + 1.0)
}

/// `χ(j) = q^{j−1} √(q²−1)`
pub fn chi(q: usize, j: usize) -> f64 {
    let qf = q as f64;
    qf.powi(j as i32 - 1) * (qf * qf - 1.0).sqrt()
}

/// The restriction of the averaged generator to the span of
/// `|0^m 1^{w−m}⟩`, in the orthonormal basis `e_0..e_w`.
#[derive(Debug, Clone)]
pub struct RestrictedLlg {
    pub q: usize,
    pub w: usize,
    /// `(w+1)×(w+1)`, lower triangular.
    pub matrix: DMatrix<f64>,
}

impl RestrictedLlg {
    /// `[χ(w), …, χ(1), 1]`
    pub fn left_row(&self) -> Vec<f64> {
        let mut r: Vec<f64> = (0..self.w).map(|i| chi(self.q, self.w - i)).collect();
        r.push(1.0);
        r
    }

    /// `F′ = T′ − e_w [χ, 1]`
    pub fn f_prime(&self) -> DMatrix<f64> {
        let mut f = self.matrix.clone();
        for (j, v) in self.left_row().iter().enumerate() {
            f[(self.w, j)] -= v;
        }
        f
    }

    /// Rank of `T′ − z₂` on the leading `w×w` block.
    pub fn z2_geometric_multiplicity(&self) -> usize {
        let w = self.w;
        let z2 = z2_hrm(self.q);
        let block = self.matrix.view((0, 0), (w, w)).into_owned() - DMatrix::identity(w, w) * z2;
        let rank = block.svd(false, false).rank(1e-12);
        w - rank
    }
}

pub fn restricted_t_prime(q: usize, w: usize) -> RestrictedLlg {
    let z2 = z2_hrm(q);
    let ratio = z2 / q as f64;
    let mut m = DMatrix::<f64>::zeros(w + 1, w + 1);
    for col in 0..w {
        for row in col..w {
            m[(row, col)] = z2 * ratio.powi((row - col) as i32);
        }
    }
    m[(w, w)] = 1.0;
    let mut out = RestrictedLlg { q, w, matrix: m };
    // Last row from the left fixed point: y = χ − χR.
    let row = out.left_row();
    for j in 0..w {
        let chi_r: f64 = (0..w).map(|i| row[i] * out.matrix[(i, j)]).sum();
        out.matrix[(w, j)] = row[j] - chi_r;
    }
    out
}

/// `[χR^τ]_j = χ(w−j) Σ_{k=0}^{w−1−j} C(τ+k−1, k) (1−z₂)^k z₂^τ`, with the
/// binomial weights built up in log form.
pub fn chi_r_tau(q: usize, w: usize, tau: usize) -> Vec<f64> {
    let z2 = z2_hrm(q);
    let (lz, lp) = (z2.ln(), (1.0 - z2).ln());
    // Cumulative negative-binomial weights P(k ≤ K).
    let mut cdf = Vec::with_capacity(w);
    let mut log_term = tau as f64 * lz;
    let mut acc = 0.0;
    for k in 0..w {
        if k > 0 {
            log_term += ((tau + k - 1) as f64 / k as f64).ln() + lp;
        }
        acc += log_term.exp();
        cdf.push(acc);
    }
    (0..w).map(|j| chi(q, w - j) * cdf[w - 1 - j]).collect()
}

/// `‖χR^τ‖`, the leading singular value of the averaged `F_w^τ` up to the
/// `R^τ` block.
pub fn hrm_leading_sv_exact(q: usize, w: usize, tau: usize) -> Result<f64> {
    if w == 0 || tau == 0 {
        return Err(Error::BadParams("need w ≥ 1 and τ ≥ 1".into()));
    }
    if (w as f64) * (q as f64).ln() > 700.0 {
        return Err(Error::Overflow(format!("q^w with q = {q}, w = {w}")));
    }
    Ok(norm(&chi_r_tau(q, w, tau).into_iter().map(c).collect::<Vec<_>>()))
}

/// Leading singular value of `(F′_w)^τ` by dense SVD.
pub fn restricted_leading_sv(q: usize, w: usize, tau: usize) -> f64 {
    let f = restricted_t_prime(q, w).f_prime();
    let mut p = DMatrix::<f64>::identity(w + 1, w + 1);
    for _ in 0..tau {
        p = &f * p;
    }
    p.svd(false, false).singular_values.max()
}

/// Adaptive Simpson quadrature to relative tolerance `rel_tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Option<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Some(left + right + delta / 15.0);
        }
        if depth == 0 {
            return None;
        }
        Some(
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?,
        )
    }
    if b <= a {
        return Ok(0.0);
    }
    // A coarse pass sets the absolute scale for the relative target.
    let n = 64;
    let h = (b - a) / n as f64;
    let coarse: f64 = (0..n)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            simpson(f(x0), f(0.5 * (x0 + x1)), f(x1), x0, x1)
        })
        .sum();
    let tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for i in 0..n {
        let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        let whole = simpson(f0, fm, f1, x0, x1);
        total += rec(f, x0, x1, f0, fm, f1, whole, tol / n as f64, max_depth)
            .ok_or_else(|| Error::QuadratureFailure(format!("no convergence on [{x0}, {x1}]")))?;
    }
    if !total.is_finite() {
        return Err(Error::QuadratureFailure("non-finite integral".into()));
    }
    Ok(total)
}

/// Gaussian approximation of the negative-binomial weights summed up to
/// `w′ = xτ`:
/// `∫_0^{xτ} dw′ √(z₂ / (2π(1−z₂)(τ+w′))) exp{−[z₂w′ − (1−z₂)τ]² / (2z₂(1−z₂)(τ+w′))}`.
pub fn f_tau(x: f64, tau: f64, q: usize) -> Result<f64> {
    if !(x > 0.0) || !(tau >= 1.0) {
        return Err(Error::BadParams(format!("f_tau needs x > 0 and τ ≥ 1, got x = {x}, τ = {tau}")));
    }
    let z2 = z2_hrm(q);
    let p = 1.0 - z2;
    let integrand = move |wp: f64| {
        let n = tau + wp;
        let d = z2 * wp - p * tau;
        (z2 / (2.0 * std::f64::consts::PI * p * n)).sqrt() * (-d * d / (2.0 * z2 * p * n)).exp()
    };
    adaptive_simpson(&integrand, 0.0, x * tau, 1e-8, 40)
}

/// Location `τ/w` where `λ_{w,τ}/q^w` first drops below one half, linearly
/// interpolated in `τ`.
pub fn ridge(q: usize, w: usize, tau_max: usize) -> Result<Option<f64>> {
    let scale = (q as f64).powi(w as i32);
    let mut prev = (0usize, 1.0f64);
    for tau in 1..=tau_max {
        let r = hrm_leading_sv_exact(q, w, tau)? / scale;
        if r < 0.5 {
            let (t0, r0) = prev;
            let t = t0 as f64 + (r0 - 0.5) / (r0 - r) * (tau - t0) as f64;
            return Ok(Some(t / w as f64));
        }
        prev = (tau, r);
    }
    Ok(None)
}

/// The dual-unitary restriction to `{|0^w⟩, |1^w⟩}` (orthonormalized).
#[derive(Debug, Clone)]
pub struct DuClosedForm {
    pub t_pow: DMatrix<f64>,
    pub f_pow: DMatrix<f64>,
    pub norm_t: f64,
    pub norm_f: f64,
}

pub fn du_closed_form(q: usize, w: usize, _tau: usize) -> DuClosedForm {
    let s = ((q as f64).powi(2 * w as i32) - 1.0).sqrt();
    let t_pow = DMatrix::identity(2, 2);
    let f_pow = DMatrix::from_row_slice(2, 2, &[0.0, -s, 0.0, 1.0]);
    DuClosedForm {
        norm_t: 1.0,
        norm_f: f_pow.clone().svd(false, false).singular_values.max(),
        t_pow,
        f_pow,
    }
}

/// The localized restriction in the basis `e_0..e_w`.
#[derive(Debug, Clone)]
pub struct LocalizedClosedForm {
    pub t_pow: DMatrix<f64>,
    pub f_pow: DMatrix<f64>,
    pub norm_f: f64,
}

pub fn localized_closed_form(q: usize, w: usize, tau: usize) -> LocalizedClosedForm {
    let qt = (q as f64).powi(tau as i32);
    let mut t = DMatrix::<f64>::zeros(w + 1, w + 1);
    for m in 0..w {
        if m + tau <= w - 1 {
            t[(m + tau, m)] = qt;
        } else {
            t[(w, m)] = chi(q, w - m);
        }
    }
    t[(w, w)] = 1.0;
    let mut f = t.clone();
    for m in 0..w {
        f[(w, m)] -= chi(q, w - m);
    }
    f[(w, w)] = 0.0;
    let norm_f = if tau < w { (q as f64).powi(w as i32) } else { 0.0 };
    LocalizedClosedForm {
        t_pow: t,
        f_pow: f,
        norm_f,
    }
}

/// Distance between the sample mean of `n` random-circuit generators
/// applied to a pair-span vector and the averaged action, with the
/// sample standard error of that mean.
pub fn monte_carlo_check(q: usize, w: usize, coords: &[C64], n: usize, seed: u64) -> Result<(f64, f64)> {
    let avg = AveragedHrm::new(q, w)?;
    if coords.len() != avg.dim() {
        return Err(Error::DimensionMismatch {
            expected: avg.dim(),
            got: coords.len(),
        });
    }
    let zero = pair_zero(q).data;
    let one = pair_one(q).data;
    let expand = |cv: &[C64]| -> Vec<C64> {
        let mut out = vec![c(0.0); zero.len().pow(w as u32)];
        for (j, cj) in cv.iter().enumerate() {
            if *cj == c(0.0) {
                continue;
            }
            let sites: Vec<&[C64]> = (0..w).map(|a| if bit(j, a, w) == 0 { &zero[..] } else { &one[..] }).collect();
            crate::linalg::axpy(&mut out, *cj, &product_state(&sites));
        }
        out
    };
    let input = expand(coords);
    let target = expand(&avg.apply_t(coords));
    let mut samples = Vec::with_capacity(n);
    for k in 0..n as u64 {
        let spec = GateSpec::random(Model::Hrm, q, seed.wrapping_add(k));
        samples.push(Llg::left(&spec, w, Mode::T)?.apply_at(&input, 1)?);
    }
    let dim = input.len();
    let mut mean = vec![c(0.0); dim];
    for s in &samples {
        crate::linalg::axpy(&mut mean, c(1.0 / n as f64), s);
    }
    let var: f64 = samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / (n as f64 - 1.0).max(1.0);
    let err: f64 = mean.iter().zip(&target).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok((err, (var / n as f64).sqrt()))
}

/// The averaged OTOC evaluated from the default probe boundary states of
/// the full replica space, for cross-checks of [`AveragedHrm::right_coords`].
pub fn boundary_overlaps(q: usize) -> (C64, C64, C64, C64) {
    let b = BoundaryStates::default_probes(q);
    let (z, o) = (pair_zero(q).data, pair_one(q).data);
    (dot(&z, &b.bottom), dot(&o, &b.bottom), dot(&b.top, &z), dot(&b.top, &o))
}

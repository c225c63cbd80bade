//! Small dense helpers shared by the other modules: Kronecker products,
//! residual norms, and the strided two-axis gate application that every
//! tensor sweep in the crate is built on.

use nalgebra::{DMatrix, Schur};
use rayon::prelude::*;

use crate::{CMatrix, C64};

/// Below this many amplitudes the strided kernels stay single-threaded.
const PAR_THRESHOLD: usize = 1 << 15;

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |(u†u − 1)_ij|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - identity(n)))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian inner product `⟨a|b⟩` accumulated in index order.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn scale(a: &mut [C64], s: C64) {
    a.iter_mut().for_each(|z| *z *= s);
}

/// `y += s x`
pub fn axpy(y: &mut [C64], s: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += s * xi);
}

/// Eigenvalues of a general complex matrix from its Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    let n = m.nrows();
    let eps = f64::EPSILON;
    let max_iter = 100 * n.max(1);
    if let Some(s) = Schur::try_new(m.clone(), eps, max_iter) {
        return schur_diagonal(s);
    }
    // QR can cycle on highly degenerate spectra; an irrational shift breaks it.
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for k in 1..=8 {
        let k = k as f64;
        let shift = C64::new(0.1 * k * std::f64::consts::FRAC_1_SQRT_2, 0.07 * k / std::f64::consts::E) * scale;
        let shifted = m + CMatrix::identity(n, n) * shift;
        if let Some(s) = Schur::try_new(shifted, eps, max_iter) {
            return schur_diagonal(s).into_iter().map(|z| z - shift).collect();
        }
    }
    let s = Schur::try_new(m.clone(), 1e-10, 100 * max_iter).expect("Schur iteration did not converge");
    schur_diagonal(s)
}

fn schur_diagonal(schur: Schur<C64, nalgebra::Dyn>) -> Vec<C64> {
    match schur.eigenvalues() {
        Some(ev) => ev.iter().copied().collect(),
        None => {
            let (_, t) = schur.unpack();
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        }
    }
}

/// Applies a `d²×d²` matrix to axes `(left, right)` of a tensor with `n_axes`
/// axes of dimension `d`, stored row-major (axis 0 slowest). The matrix index
/// is `d·(left level) + (right level)`; `left` and `right` may appear in any
/// order along the tensor.
pub fn apply_pair(data: &mut [C64], d: usize, n_axes: usize, left: usize, right: usize, m: &CMatrix) {
    let dd = d * d;
    assert_eq!(m.shape(), (dd, dd));
    assert!(left != right && left < n_axes && right < n_axes);
    assert_eq!(data.len(), d.pow(n_axes as u32));

    let stride = |axis: usize| d.pow((n_axes - 1 - axis) as u32);
    let (sl, sr) = (stride(left), stride(right));
    let offsets: Vec<usize> = (0..dd).map(|k| (k / d) * sl + (k % d) * sr).collect();
    let (hi, lo) = (left.min(right), left.max(right));
    let inner = d.pow((n_axes - 1 - lo) as u32);
    let mid = d.pow((lo - hi - 1) as u32);
    let outer = d.pow(hi as u32);
    let n_bases = outer * mid * inner;
    let (s_hi, s_lo) = (stride(hi) * d, stride(lo) * d);
    let base_of = move |b: usize| {
        let i = b % inner;
        let rest = b / inner;
        (rest / mid) * s_hi + (rest % mid) * s_lo + i
    };
    // Row-major split copy of the matrix.
    let (m_re, m_im): (Vec<f64>, Vec<f64>) = (0..dd * dd).map(|k| m[(k / dd, k % dd)]).map(|z| (z.re, z.im)).unzip();

    // Tiles of consecutive bases, gathered into split re/im scratch so the
    // row updates vectorize.
    let ptr = SyncPtr(data.as_mut_ptr());
    let n_tiles = n_bases.div_ceil(TILE);
    let tile_job = move |j: usize, tile: &mut TileScratch| {
        let b0 = j * TILE;
        let len = TILE.min(n_bases - b0);
        for (t, slot) in tile.bases[..len].iter_mut().enumerate() {
            *slot = base_of(b0 + t);
        }
        // SAFETY: each base owns the disjoint index set `base + offsets[k]`,
        // all of which are in bounds by construction; tiles cover disjoint
        // base ranges.
        unsafe { tile.run(ptr.get(), len, &offsets, &m_re, &m_im) };
    };
    if data.len() >= PAR_THRESHOLD {
        (0..n_tiles)
            .into_par_iter()
            .with_min_len(16)
            .for_each_init(|| TileScratch::new(dd), |tile, j| tile_job(j, tile));
    } else {
        let mut tile = TileScratch::new(dd);
        (0..n_tiles).for_each(|j| tile_job(j, &mut tile));
    }
}

const TILE: usize = 64;

struct TileScratch {
    dd: usize,
    bases: [usize; TILE],
    x_re: Vec<f64>,
    x_im: Vec<f64>,
    acc_re: [f64; TILE],
    acc_im: [f64; TILE],
}

impl TileScratch {
    fn new(dd: usize) -> Self {
        Self {
            dd,
            bases: [0; TILE],
            x_re: vec![0.0; dd * TILE],
            x_im: vec![0.0; dd * TILE],
            acc_re: [0.0; TILE],
            acc_im: [0.0; TILE],
        }
    }

    /// # Safety
    /// `bases[t] + offsets[k]` must be in bounds and owned by the caller for
    /// every `k` and `t < len`.
    unsafe fn run(&mut self, ptr: *mut C64, len: usize, offsets: &[usize], m_re: &[f64], m_im: &[f64]) {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
                return self.run_avx2(ptr, len, offsets, m_re, m_im);
            }
        }
        self.run_generic(ptr, len, offsets, m_re, m_im)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn run_avx2(&mut self, ptr: *mut C64, len: usize, offsets: &[usize], m_re: &[f64], m_im: &[f64]) {
        self.run_generic(ptr, len, offsets, m_re, m_im)
    }

    #[inline(always)]
    unsafe fn run_generic(&mut self, ptr: *mut C64, len: usize, offsets: &[usize], m_re: &[f64], m_im: &[f64]) {
        let dd = self.dd;
        let bases = &self.bases[..len];
        for (k, &off) in offsets.iter().enumerate() {
            let (xr, xi) = (&mut self.x_re[k * TILE..k * TILE + len], &mut self.x_im[k * TILE..k * TILE + len]);
            for ((r, i), &b) in xr.iter_mut().zip(xi.iter_mut()).zip(bases) {
                let z = *ptr.add(b + off);
                *r = z.re;
                *i = z.im;
            }
        }
        for (r, &off) in offsets.iter().enumerate() {
            let (ar, ai) = (&mut self.acc_re[..len], &mut self.acc_im[..len]);
            ar.fill(0.0);
            ai.fill(0.0);
            for k in 0..dd {
                let (a, b) = (m_re[r * dd + k], m_im[r * dd + k]);
                let xr = &self.x_re[k * TILE..k * TILE + len];
                let xi = &self.x_im[k * TILE..k * TILE + len];
                for t in 0..len {
                    ar[t] += a * xr[t] - b * xi[t];
                    ai[t] += a * xi[t] + b * xr[t];
                }
            }
            for ((&b, re), im) in bases.iter().zip(ar.iter()).zip(ai.iter()) {
                *ptr.add(b + off) = C64::new(*re, *im);
            }
        }
    }
}

/// Applies a `d×d` matrix to a single axis.
pub fn apply_single(data: &mut [C64], d: usize, n_axes: usize, axis: usize, m: &CMatrix) {
    assert_eq!(m.shape(), (d, d));
    let s = d.pow((n_axes - 1 - axis) as u32);
    let block = s * d;
    let mut scratch = vec![C64::new(0.0, 0.0); d];
    for chunk in data.chunks_mut(block) {
        for i in 0..s {
            for (k, v) in scratch.iter_mut().enumerate() {
                *v = chunk[i + k * s];
            }
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (c, v) in scratch.iter().enumerate() {
                    acc += m[(r, c)] * v;
                }
                chunk[i + r * s] = acc;
            }
        }
    }
}

#[derive(Clone, Copy)]
struct SyncPtr(*mut C64);

impl SyncPtr {
    fn get(self) -> *mut C64 {
        self.0
    }
}

// SAFETY: only used to hand disjoint index sets to worker threads.
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

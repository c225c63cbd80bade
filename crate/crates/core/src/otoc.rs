//! OTOCs of brick-wall circuits.
//!
//! Light-like coordinates `(w, τ)` and space-time coordinates `(x, t)` are
//! related by `x = w − τ − 1`, `t = w + τ − 1`. The operator `σ` starts on
//! site 0 and `ν` sits on site `x`; layer `s` carries gates on bonds
//! `(i, i+1)` with `i ≡ s (mod 2)`, so the light cone of site 0 after `t`
//! layers is `[−t, t−1]`.
//!
//! Three independent evaluations are provided: sequential applications of
//! the left-moving generator, of the right-moving generator, and a
//! brute-force Heisenberg evolution `A = U σ U†` on the support window.

use serde::{Deserialize, Serialize};

use crate::gates::{Circuit, GateSpec, Position};
use crate::linalg::{apply_pair, apply_single, dot, norm, scale};
use crate::llg::{BoundaryStates, Llg, Mode};
use crate::replica::{contract_first, contract_last, pair_one, pair_zero, product_state};
use crate::spectral::{leading_singular_triplet, LlgPower, PowerOperator, SingularTriplet};
use crate::{CMatrix, Error, Result, C64};

/// Largest support-window operator (in amplitudes) the brute force builds.
pub const BRUTE_FORCE_LIMIT: usize = 1 << 24;

/// Iteration cap and tolerance for the LSVA power iteration.
const LSVA_TOL: f64 = 1e-12;
const LSVA_MAX_ITER: usize = 20_000;

pub fn to_xt(w: usize, tau: usize) -> (i64, i64) {
    let (w, tau) = (w as i64, tau as i64);
    (w - tau - 1, w + tau - 1)
}

/// Inverse of [`to_xt`]; `None` off the light-like lattice or outside the
/// overlap region (`w ≥ 1`, `τ ≥ 1`).
pub fn to_wtau(x: i64, t: i64) -> Option<(usize, usize)> {
    if (t + x).rem_euclid(2) != 0 {
        return None;
    }
    let w = (t + x) / 2 + 1;
    let tau = (t - x) / 2;
    (w >= 1 && tau >= 1).then_some((w as usize, tau as usize))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    LlgLeft,
    LlgRight,
    BruteForce,
    Lsva,
    LsvaRight,
    Variational,
    Averaged,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::LlgLeft => "llg-left",
            Method::LlgRight => "llg-right",
            Method::BruteForce => "brute-force",
            Method::Lsva => "lsva",
            Method::LsvaRight => "lsva-right",
            Method::Variational => "variational",
            Method::Averaged => "averaged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtocPoint {
    pub w: usize,
    pub tau: usize,
    pub x: i64,
    pub t: i64,
    pub re: f64,
    pub im: f64,
    pub method: Method,
    /// Method-specific error estimate (F/T residual, or distance to the
    /// exact value); zero when not applicable.
    pub err_abs: f64,
}

impl OtocPoint {
    pub fn new(w: usize, tau: usize, value: C64, method: Method, err_abs: f64) -> Self {
        let (x, t) = to_xt(w, tau);
        Self {
            w,
            tau,
            x,
            t,
            re: value.re,
            im: value.im,
            method,
            err_abs,
        }
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OtocSeries {
    pub spec: GateSpec,
    pub probe: String,
    pub points: Vec<OtocPoint>,
}

pub const CSV_HEADER: &str = "model,seed,q,w,tau,x,t,method,C_re,C_im,err_abs";

impl OtocSeries {
    pub fn new(spec: &GateSpec, probe: impl Into<String>) -> Self {
        Self {
            spec: spec.clone(),
            probe: probe.into(),
            points: Vec::new(),
        }
    }

    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:.15e},{:.15e},{:.3e}\n",
                self.spec.model,
                self.spec.seed,
                self.spec.q,
                p.w,
                p.tau,
                p.x,
                p.t,
                p.method.tag(),
                p.re,
                p.im,
                p.err_abs
            ));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows())
    }

    /// Largest F/T residual among left-moving points.
    pub fn max_residual(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.method == Method::LlgLeft)
            .fold(0.0, |m, p| m.max(p.err_abs))
    }
}

/// `C(w, τ)` for `τ = 1..=tau_max` from the left-moving generator with the
/// default probes.
pub fn otoc_llg_left(spec: &GateSpec, w: usize, tau_max: usize) -> Result<OtocSeries> {
    otoc_llg_left_with(spec, &BoundaryStates::default_probes(spec.q), w, tau_max)
}

/// Runs `T^τ` and `F^τ` side by side; each point stores the `F` value with
/// `|(1 − ⟨L|T^τ|R⟩) − (−⟨L|F^τ|R⟩)|` as its error.
pub fn otoc_llg_left_with(spec: &GateSpec, probes: &BoundaryStates, w: usize, tau_max: usize) -> Result<OtocSeries> {
    if w == 0 {
        return Err(Error::BadParams("w must be at least 1".into()));
    }
    let t_op = Llg::left(spec, w, Mode::T)?;
    let f_op = t_op.with_mode(Mode::F);
    let l = probes.left_state(w);
    let mut vt = probes.right_state(w);
    let mut vf = vt.clone();
    let mut series = OtocSeries::new(spec, probe_label(probes));
    for tau in 1..=tau_max {
        vt = t_op.apply_at(&vt, tau as i64)?;
        vf = f_op.apply_at(&vf, tau as i64)?;
        let ct = C64::new(1.0, 0.0) - dot(&l, &vt);
        let cf = -dot(&l, &vf);
        series
            .points
            .push(OtocPoint::new(w, tau, cf, Method::LlgLeft, (ct - cf).norm()));
    }
    Ok(series)
}

fn probe_label(p: &BoundaryStates) -> String {
    if p.sigma == crate::replica::default_probe(p.q) && p.nu == p.sigma {
        "default".into()
    } else {
        "custom".into()
    }
}

pub fn otoc_llg_right(spec: &GateSpec, w: usize, tau: usize) -> Result<C64> {
    otoc_llg_right_with(spec, &BoundaryStates::default_probes(spec.q), w, tau)
}

/// `1 − (L̃_τ| T_R^{w−2} |R̃_τ)`; `w = 1` is a single doubly decorated column.
pub fn otoc_llg_right_with(spec: &GateSpec, probes: &BoundaryStates, w: usize, tau: usize) -> Result<C64> {
    if w == 0 || tau == 0 {
        return Err(Error::BadParams("need w ≥ 1 and τ ≥ 1".into()));
    }
    let op = Llg::right(spec, tau, Mode::T)?;
    let one = C64::new(1.0, 0.0);
    if w == 1 {
        return Ok(one - probes.single_column(&op));
    }
    let mut v = probes.right_moving_initial(&op);
    for a in 1..w as i64 - 1 {
        v = op.apply_at(&v, a)?;
    }
    Ok(one - probes.right_moving_final(&op, &v, w))
}

/// Support-window operator on sites `lo..=hi`, stored as a row-major
/// `q^n × q^n` matrix with axes `(rows 0..n, columns 0..n)`.
struct Window {
    q: usize,
    lo: i64,
    hi: i64,
    data: Vec<C64>,
}

impl Window {
    fn n(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    /// Pads with identity on `left` extra sites before and `right` after.
    fn expand(&mut self, left: usize, right: usize) {
        if left == 0 && right == 0 {
            return;
        }
        let q = self.q;
        let n = self.n();
        let m = n + left + right;
        let (qn, ql, qr) = (q.pow(n as u32), q.pow(left as u32), q.pow(right as u32));
        let qm = q.pow(m as u32);
        let mut out = vec![C64::new(0.0, 0.0); qm * qm];
        for r_old in 0..qn {
            for c_old in 0..qn {
                let val = self.data[r_old * qn + c_old];
                if val == C64::new(0.0, 0.0) {
                    continue;
                }
                for a in 0..ql {
                    for b in 0..qr {
                        let r = (a * qn + r_old) * qr + b;
                        let c = (a * qn + c_old) * qr + b;
                        out[r * qm + c] = val;
                    }
                }
            }
        }
        self.lo -= left as i64;
        self.hi += right as i64;
        self.data = out;
    }
}

pub fn otoc_bruteforce(spec: &GateSpec, x: i64, t: usize, l_chain: Option<usize>) -> Result<C64> {
    let p = crate::replica::default_probe(spec.q);
    otoc_bruteforce_with(spec, &p, &p, x, t, l_chain)
}

/// `1 − tr[A† ν† A ν]/q^L` with `A = U σ U†`, `U` the first `t` layers.
/// The chain has `l_chain` sites (default `2t + 2`) with `σ` at its centre.
pub fn otoc_bruteforce_with(
    spec: &GateSpec,
    sigma: &CMatrix,
    nu: &CMatrix,
    x: i64,
    t: usize,
    l_chain: Option<usize>,
) -> Result<C64> {
    let q = spec.q;
    let chain = l_chain.unwrap_or(2 * t + 2);
    let (first, last) = (-((chain / 2) as i64), chain as i64 - 1 - (chain / 2) as i64);
    if x < first || x > last {
        return Err(Error::LightConeClipped { chain, t, x });
    }
    let circuit = Circuit::from_spec(spec)?;
    let mut win = Window {
        q,
        lo: 0,
        hi: 0,
        data: sigma.transpose().iter().copied().collect(),
    };
    for s in 1..=t as i64 {
        // Bonds touching the window in this layer.
        let mut bonds = Vec::new();
        let mut i = win.lo - 1;
        if (i - s).rem_euclid(2) != 0 {
            i += 1;
        }
        while i <= win.hi {
            bonds.push(i);
            i += 2;
        }
        let need_lo = bonds.iter().copied().min().map_or(win.lo, |b| b.min(win.lo));
        let need_hi = bonds.iter().copied().max().map_or(win.hi, |b| (b + 1).max(win.hi));
        if need_lo < first || need_hi > last {
            return Err(Error::LightConeClipped { chain, t, x });
        }
        let n_new = (need_hi - need_lo + 1) as usize;
        let amplitudes = (q as u128).pow(2 * n_new as u32);
        if amplitudes > BRUTE_FORCE_LIMIT as u128 {
            return Err(Error::TooLarge {
                what: "brute-force support window",
                dim: usize::try_from(amplitudes).unwrap_or(usize::MAX),
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        win.expand((win.lo - need_lo) as usize, (need_hi - win.hi) as usize);
        let n = win.n();
        for &b in &bonds {
            let g = circuit.gate_at(Position::new(s, b)).matrix;
            let (l, r) = ((b - win.lo) as usize, (b + 1 - win.lo) as usize);
            apply_pair(&mut win.data, q, 2 * n, l, r, &g);
            apply_pair(&mut win.data, q, 2 * n, n + l, n + r, &g.conjugate());
        }
    }
    if x < win.lo || x > win.hi {
        return Ok(C64::new(0.0, 0.0));
    }
    let n = win.n();
    let k = (x - win.lo) as usize;
    let mut b = win.data.clone();
    apply_single(&mut b, q, 2 * n, k, &nu.adjoint());
    apply_single(&mut b, q, 2 * n, n + k, &nu.transpose());
    let tr = dot(&win.data, &b) / (q as f64).powi(n as i32);
    Ok(C64::new(1.0, 0.0) - tr)
}

/// Brute force at the default chain and at two extra sites; returns the
/// value and the difference between the two.
pub fn bruteforce_doubling_check(spec: &GateSpec, x: i64, t: usize) -> Result<(C64, f64)> {
    let a = otoc_bruteforce(spec, x, t, None)?;
    let b = otoc_bruteforce(spec, x, t, Some(2 * t + 4))?;
    Ok((a, (a - b).norm()))
}

#[derive(Debug, Clone)]
pub struct LsvaResult {
    pub value: C64,
    pub triplet: SingularTriplet,
}

/// `−λ ⟨L|λ^L⟩⟨λ^R|R⟩` from the leading triplet of `F_w^τ`.
pub fn lsva(spec: &GateSpec, w: usize, tau: usize) -> Result<LsvaResult> {
    let probes = BoundaryStates::default_probes(spec.q);
    let op = Llg::left(spec, w, Mode::F)?;
    let power = LlgPower::new(op, tau);
    let tr = leading_singular_triplet(&power, LSVA_TOL, LSVA_MAX_ITER, 11)?.require_converged()?;
    let value = -tr.lambda * dot(&probes.left_state(w), &tr.left) * dot(&tr.right, &probes.right_state(w));
    Ok(LsvaResult { value, triplet: tr })
}

/// The right-moving counterpart, from `F_R^{w−2}` on `τ` legs; `w ≥ 3`.
pub fn lsva_right(spec: &GateSpec, w: usize, tau: usize) -> Result<LsvaResult> {
    if w < 3 {
        return Err(Error::BadParams("right-moving LSVA needs w ≥ 3".into()));
    }
    let probes = BoundaryStates::default_probes(spec.q);
    let op = Llg::right(spec, tau, Mode::F)?;
    let r = probes.right_moving_initial(&op);
    let l = probes.right_moving_final_ket(&op, w);
    let power = LlgPower::new(op, w - 2);
    let tr = leading_singular_triplet(&power, LSVA_TOL, LSVA_MAX_ITER, 11)?.require_converged()?;
    let value = -tr.lambda * dot(&l, &tr.left) * dot(&tr.right, &r);
    Ok(LsvaResult { value, triplet: tr })
}

#[derive(Debug, Clone)]
pub struct VariationalResult {
    pub value: C64,
    /// `⟨λ^L|F^τ|λ^R⟩` at the optimum.
    pub rayleigh: C64,
    pub sweeps: usize,
    pub v_left: Vec<C64>,
    pub v_right: Vec<C64>,
    /// `|⟨λ^L_var|λ^L⟩⟨λ^R|λ^R_var⟩|` against a supplied exact triplet.
    pub overlap: Option<f64>,
}

pub fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let n = norm(&v);
    if n > 0.0 {
        scale(&mut v, C64::new(1.0 / n, 0.0));
    }
    v
}

/// Optimum of the product ansatz.
#[derive(Debug, Clone)]
pub struct ProductOptimum {
    pub v_left: Vec<C64>,
    pub v_right: Vec<C64>,
    /// `⟨λ^L|B|λ^R⟩`, real and non-negative at the optimum.
    pub rayleigh: f64,
    pub sweeps: usize,
}

/// `|0̂^{w−1}⟩ ⊗ |v⟩`
pub fn embed_left(zhat: &[C64], w: usize, v: &[C64]) -> Vec<C64> {
    let mut sites: Vec<&[C64]> = vec![zhat; w - 1];
    sites.push(v);
    product_state(&sites)
}

/// `|v⟩ ⊗ |1̂^{w−1}⟩`
pub fn embed_right(ohat: &[C64], w: usize, v: &[C64]) -> Vec<C64> {
    let mut sites: Vec<&[C64]> = vec![v];
    sites.extend(std::iter::repeat_n(ohat, w - 1));
    product_state(&sites)
}

/// Maximizes `|⟨0̂^{w−1} v_L|B|v_R 1̂^{w−1}⟩|` by alternating projections
/// until the value settles to `1e-8` relative.
pub fn variational_product(
    op: &dyn PowerOperator,
    w: usize,
    zhat: &[C64],
    ohat: &[C64],
    v_right: Vec<C64>,
    max_sweeps: usize,
) -> Result<ProductOptimum> {
    let mut v_r = normalized(v_right);
    let mut rq = f64::NAN;
    for sweep in 1..=max_sweeps {
        let mut u = op.forward(&embed_right(ohat, w, &v_r))?;
        for _ in 0..w - 1 {
            u = contract_first(&u, zhat);
        }
        let v_l = normalized(u);
        let mut y = op.backward(&embed_left(zhat, w, &v_l))?;
        for _ in 0..w - 1 {
            y = contract_last(&y, ohat);
        }
        // With v_R ∝ y the overlap ⟨λ^R|B†|λ^L⟩ is exactly ‖y‖.
        let value = norm(&y);
        v_r = normalized(y);
        let done = (value - rq).abs() < 1e-8 * value;
        rq = value;
        if done || value == 0.0 {
            return Ok(ProductOptimum {
                v_left: v_l,
                v_right: v_r,
                rayleigh: rq,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NoConvergence {
        method: "variational sweeps",
        iterations: max_sweeps,
        residual: rq,
    })
}

/// Product ansatz `|λ^L⟩ = |0̂^{w−1}⟩ ⊗ |v_L⟩`, `⟨λ^R| = ⟨v_R| ⊗ ⟨1̂^{w−1}|`
/// (hats: unit-normalized pair states) for `F_w^τ`.
pub fn variational_lsva(
    spec: &GateSpec,
    w: usize,
    tau: usize,
    max_sweeps: usize,
    exact: Option<&SingularTriplet>,
) -> Result<VariationalResult> {
    if w == 0 || tau == 0 {
        return Err(Error::BadParams("need w ≥ 1 and τ ≥ 1".into()));
    }
    let q = spec.q;
    let probes = BoundaryStates::default_probes(q);
    let power = LlgPower::new(Llg::left(spec, w, Mode::F)?, tau);
    let zhat = normalized(pair_zero(q).data);
    let ohat = normalized(pair_one(q).data);
    let opt = variational_product(&power, w, &zhat, &ohat, probes.bottom.clone(), max_sweeps)?;
    let lam_l = embed_left(&zhat, w, &opt.v_left);
    let lam_r = embed_right(&ohat, w, &opt.v_right);
    let rq = C64::new(opt.rayleigh, 0.0);
    let value = -rq * dot(&probes.left_state(w), &lam_l) * dot(&lam_r, &probes.right_state(w));
    let overlap = exact.map(|tr| (dot(&lam_l, &tr.left) * dot(&tr.right, &lam_r)).norm());
    Ok(VariationalResult {
        value,
        rayleigh: rq,
        sweeps: opt.sweeps,
        v_left: opt.v_left,
        v_right: opt.v_right,
        overlap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub w: usize,
    pub tau: usize,
    pub c: f64,
    pub c_lsva: f64,
    pub err: f64,
}

/// `C`, `C_LSVA` and their distance on the grid `1..=w_max × 1..=τ_max`.
pub fn butterfly_scan(spec: &GateSpec, w_max: usize, tau_max: usize) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::new();
    for w in 1..=w_max {
        let series = otoc_llg_left(spec, w, tau_max)?;
        for p in &series.points {
            let l = lsva(spec, w, p.tau)?;
            rows.push(ScanRow {
                w,
                tau: p.tau,
                c: p.re,
                c_lsva: l.value.re,
                err: (p.value() - l.value).norm(),
            });
        }
    }
    Ok(rows)
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("w,tau,C,C_lsva,err\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.15e},{:.15e},{:.3e}\n", r.w, r.tau, r.c, r.c_lsva, r.err));
    }
    s
}

/// Arithmetic mean and standard error over realizations.
pub fn ensemble_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

use std::collections::BTreeMap;

use lightlike::analytic::{
    butterfly_velocity, du_closed_form, f_tau, hrm_eigenvalues, hrm_leading_sv_exact, localized_closed_form, ridge,
    z2_hrm,
};
use lightlike::gates::{build_gate, Arrangement, GateSpec, Model, Position};
use lightlike::levelstats::{
    histogram, histogram_csv, ks_one_sample, ks_two_sample, poisson_cdf, sample_matrix_power_ensemble,
    sector_spacings, wigner_unitary_cdf, Ensemble, Sector, SECTOR_LIMIT,
};
use lightlike::linalg::{dot, norm};
use lightlike::llg::{random_unit_vec, BoundaryStates, Direction, GateSource, Llg, Mode, DENSE_LIMIT, VECTOR_LIMIT};
use lightlike::otoc::{
    ensemble_mean, lsva, lsva_right, otoc_bruteforce_with, otoc_llg_left, otoc_llg_left_with, otoc_llg_right_with,
    to_xt, variational_lsva, Method, OtocPoint, OtocSeries, BRUTE_FORCE_LIMIT, CSV_HEADER,
};
use lightlike::replica::{default_probe, site_dim, GeneralizedPauli};
use lightlike::spectral::{
    cluster_eigenvalues, eigen_spectrum, leading_singular_triplet, recursion_check, subleading_eigenvalue, tail_fit,
    LlgPower, SpectrumReport,
};
use lightlike::{CMatrix, Error, C64};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::output::Output;
use crate::settings::Settings;

/// Exit code plus diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub type Outcome<T = ()> = std::result::Result<T, Failure>;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::BadParams(_)
        | Error::WrongQ { .. }
        | Error::DimensionMismatch { .. }
        | Error::LightConeClipped { .. } => 2,
        Error::TooLarge { .. } | Error::Overflow(_) => 4,
        Error::NoConvergence { .. }
        | Error::InsufficientTail { .. }
        | Error::QuadratureFailure(_)
        | Error::NotSymmetric { .. }
        | Error::Io(_)
        | Error::Json(_) => 3,
    }
}

impl Failure {
    pub fn from_error(job: &str, e: Error) -> Self {
        let code = exit_code(&e);
        let message = match code {
            3 => format!("job '{job}' failed: {e}"),
            _ if job == "config" => e.to_string(),
            _ => format!("{job}: {e}"),
        };
        Self { code, message }
    }

    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

pub trait JobExt<T> {
    fn job(self, name: impl FnOnce() -> String) -> Outcome<T>;
    fn cfg(self) -> Outcome<T>;
}

impl<T> JobExt<T> for lightlike::Result<T> {
    fn job(self, name: impl FnOnce() -> String) -> Outcome<T> {
        self.map_err(|e| Failure::from_error(&name(), e))
    }

    fn cfg(self) -> Outcome<T> {
        self.map_err(|e| Failure::from_error("config", e))
    }
}

fn pow(base: usize, exp: usize) -> u128 {
    u32::try_from(exp)
        .ok()
        .and_then(|e| (base as u128).checked_pow(e))
        .unwrap_or(u128::MAX)
}

fn guard(what: &str, dim: u128, limit: usize) -> Outcome {
    if dim > limit as u128 {
        return Err(Failure {
            code: 4,
            message: format!("resource guard: {what} needs dimension {dim}, limit is {limit}"),
        });
    }
    Ok(())
}

fn guard_llg(q: usize, legs: usize) -> Outcome {
    guard(&format!("generator on {legs} legs"), pow(site_dim(q), legs + 1), VECTOR_LIMIT)
}

fn guard_dense(q: usize, legs: usize) -> Outcome {
    guard(&format!("dense generator on {legs} legs"), pow(site_dim(q), legs), DENSE_LIMIT)
}

fn guard_bruteforce(q: usize, t: usize) -> Outcome {
    guard(&format!("brute-force window at t = {t}"), pow(q * q, 2 * t + 1), BRUTE_FORCE_LIMIT)
}

fn positive(s: &Settings, key: &str) -> Outcome<usize> {
    let v: usize = s.get(key).cfg()?;
    if v == 0 {
        return Err(Failure::config(format!("'{key}' must be at least 1")));
    }
    Ok(v)
}

/// Runs independent jobs on the global pool; results keep input order and
/// the first failure in that order wins.
fn run_jobs<I, T, F>(items: &[I], f: F) -> Outcome<Vec<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Outcome<T> + Sync + Send,
{
    let results: Vec<Outcome<T>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

fn tag(spec: &GateSpec) -> String {
    format!("{}/{}/q={}/seed={}", spec.model, spec.arrangement, spec.q, spec.seed)
}

pub fn run(s: &Settings, out: &mut Output) -> Outcome {
    out.text(&format!("{}.config", s.subcommand), &s.to_text()).job(|| "write config".into())?;
    match s.subcommand {
        "otoc" => otoc(s, out),
        "lsva" => lsva_cmd(s, out),
        "variational" => variational(s, out),
        "spectrum" => spectrum(s, out),
        "tailfit" => tailfit(s, out),
        "avg-hrm" => avg_hrm(s, out),
        "special" => special(s, out),
        "levelstats" => levelstats(s, out),
        "verify" => verify(s, out),
        other => Err(Failure::config(format!("unknown subcommand '{other}'"))),
    }
}

fn write(r: lightlike::Result<()>) -> Outcome {
    r.job(|| "write output".into())
}

fn probe(s: &Settings, key: &str, q: usize) -> Outcome<CMatrix> {
    let raw = s.raw(key).trim();
    if raw.eq_ignore_ascii_case("default") {
        return Ok(default_probe(q));
    }
    let mu: usize = s.get(key).cfg()?;
    if mu == 0 || mu >= q * q {
        return Err(Failure::config(format!("'{key}' must be a Pauli index in 1..{}", q * q)));
    }
    GeneralizedPauli::from_mu(mu, q).map(|p| p.matrix).cfg()
}

fn method_order(m: Method) -> usize {
    match m {
        Method::LlgLeft => 0,
        Method::LlgRight => 1,
        Method::BruteForce => 2,
        Method::Lsva => 3,
        Method::LsvaRight => 4,
        Method::Variational => 5,
        Method::Averaged => 6,
    }
}

fn otoc(s: &Settings, out: &mut Output) -> Outcome {
    let spec = s.spec().cfg()?;
    let q = spec.q;
    let w_max = positive(s, "w_max")?;
    let tau_max = positive(s, "tau_max")?;
    let ensemble = positive(s, "ensemble")?;
    let mut methods = Vec::new();
    for m in s.list("methods") {
        methods.push(match m.as_str() {
            "left" => Method::LlgLeft,
            "right" => Method::LlgRight,
            "bruteforce" | "brute-force" => Method::BruteForce,
            other => return Err(Failure::config(format!("unknown method '{other}'"))),
        });
    }
    if methods.is_empty() {
        return Err(Failure::config("no methods selected"));
    }
    let probes = BoundaryStates::new(q, &probe(s, "sigma", q)?, &probe(s, "nu", q)?).cfg()?;
    for m in &methods {
        match m {
            Method::LlgLeft => guard_llg(q, w_max)?,
            Method::LlgRight => guard_llg(q, tau_max)?,
            _ => guard_bruteforce(q, w_max + tau_max - 1)?,
        }
    }

    let jobs: Vec<(GateSpec, usize)> = (0..ensemble as u64)
        .flat_map(|i| {
            let spec = spec.clone().with_seed(spec.seed + i);
            (1..=w_max).map(move |w| (spec.clone(), w))
        })
        .collect();
    let series = run_jobs(&jobs, |(spec, w)| {
        let w = *w;
        let name = || format!("otoc {} w={w}", tag(spec));
        let mut series = OtocSeries::new(spec, "cli");
        let left: Option<Vec<C64>> = if methods.contains(&Method::LlgLeft) {
            let l = otoc_llg_left_with(spec, &probes, w, tau_max).job(name)?;
            let values = l.points.iter().map(|p| p.value()).collect();
            series.points.extend(l.points);
            Some(values)
        } else {
            None
        };
        for tau in 1..=tau_max {
            let err = |v: C64| left.as_ref().map_or(0.0, |l| (l[tau - 1] - v).norm());
            if methods.contains(&Method::LlgRight) {
                let v = otoc_llg_right_with(spec, &probes, w, tau).job(name)?;
                series.points.push(OtocPoint::new(w, tau, v, Method::LlgRight, err(v)));
            }
            if methods.contains(&Method::BruteForce) {
                let (x, t) = to_xt(w, tau);
                let v = otoc_bruteforce_with(spec, &probes.sigma, &probes.nu, x, t as usize, None).job(name)?;
                series.points.push(OtocPoint::new(w, tau, v, Method::BruteForce, err(v)));
            }
        }
        series.points.sort_by_key(|p| (p.tau, method_order(p.method)));
        Ok(series)
    })?;

    let mut csv = format!("{CSV_HEADER}\n");
    let mut groups: BTreeMap<(usize, usize, usize), (Method, Vec<f64>)> = BTreeMap::new();
    for s in &series {
        csv.push_str(&s.csv_rows());
        for p in &s.points {
            groups
                .entry((p.w, p.tau, method_order(p.method)))
                .or_insert_with(|| (p.method, Vec::new()))
                .1
                .push(p.re);
        }
    }
    write(out.csv("otoc.csv", &csv))?;
    if ensemble > 1 {
        let mut mean = String::from("w,tau,method,mean,stderr,samples\n");
        for ((w, tau, _), (m, values)) in &groups {
            let (mu, se) = ensemble_mean(values);
            mean.push_str(&format!("{w},{tau},{},{mu:.15e},{se:.3e},{}\n", m.tag(), values.len()));
        }
        write(out.csv("otoc_mean.csv", &mean))?;
    }
    let gp = format!(
        "set xlabel 'tau'\nset ylabel 'C(w, tau)'\n\
         plot for [w=1:{w_max}] 'otoc.csv' using 5:((strcol(8) eq 'llg-left' || strcol(8) eq 'brute-force') && $4 == w ? $9 : 1/0) \
         with linespoints title sprintf('w = %d', w)\n"
    );
    write(out.gnuplot("otoc.gp", &gp))
}

fn lsva_cmd(s: &Settings, out: &mut Output) -> Outcome {
    let spec = s.spec().cfg()?;
    let w_max = positive(s, "w_max")?;
    let tau_max = positive(s, "tau_max")?;
    let right_tau_max: usize = s.get("right_tau_max").cfg()?;
    guard_llg(spec.q, w_max)?;
    if w_max >= 3 && right_tau_max > 0 {
        guard_llg(spec.q, right_tau_max.min(tau_max))?;
    }
    let ws: Vec<usize> = (1..=w_max).collect();
    let series = run_jobs(&ws, |&w| {
        let name = || format!("lsva {} w={w}", tag(&spec));
        let mut series = otoc_llg_left(&spec, w, tau_max).job(name)?;
        let exact: Vec<C64> = series.points.iter().map(|p| p.value()).collect();
        for tau in 1..=tau_max {
            let c = exact[tau - 1];
            let v = lsva(&spec, w, tau).job(name)?.value;
            series.points.push(OtocPoint::new(w, tau, v, Method::Lsva, (v - c).norm()));
            if w >= 3 && tau <= right_tau_max {
                let v = lsva_right(&spec, w, tau).job(name)?.value;
                series.points.push(OtocPoint::new(w, tau, v, Method::LsvaRight, (v - c).norm()));
            }
        }
        series.points.sort_by_key(|p| (p.tau, method_order(p.method)));
        Ok(series)
    })?;
    let mut csv = format!("{CSV_HEADER}\n");
    for s in &series {
        csv.push_str(&s.csv_rows());
    }
    write(out.csv("lsva.csv", &csv))?;
    let gp = format!(
        "set xlabel 'tau'\nset ylabel '|C|'\nset logscale y\n\
         plot for [w=1:{w_max}] 'lsva.csv' using 5:(strcol(8) eq 'llg-left' && $4 == w ? abs($9) : 1/0) \
         with lines title sprintf('exact w = %d', w), \\\n     \
         for [w=1:{w_max}] 'lsva.csv' using 5:(strcol(8) eq 'lsva' && $4 == w ? abs($9) : 1/0) \
         with points title sprintf('LSVA w = %d', w)\n"
    );
    write(out.gnuplot("lsva.gp", &gp))
}

fn variational(s: &Settings, out: &mut Output) -> Outcome {
    let spec = s.spec().cfg()?;
    let w = positive(s, "w")?;
    let tau_max = positive(s, "tau_max")?;
    let sweeps = positive(s, "sweeps")?;
    guard_llg(spec.q, w)?;
    let exact = otoc_llg_left(&spec, w, tau_max).job(|| format!("variational {} exact", tag(&spec)))?;
    let taus: Vec<usize> = (1..=tau_max).collect();
    let rows = run_jobs(&taus, |&tau| {
        let name = || format!("variational {} w={w} tau={tau}", tag(&spec));
        let l = lsva(&spec, w, tau).job(name)?;
        let v = variational_lsva(&spec, w, tau, sweeps, Some(&l.triplet)).job(name)?;
        Ok(format!(
            "{w},{tau},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.6},{}\n",
            exact.points[tau - 1].re,
            l.value.re,
            v.value.re,
            l.triplet.lambda,
            v.rayleigh.re,
            v.overlap.unwrap_or(f64::NAN),
            v.sweeps
        ))
    })?;
    let csv = format!("w,tau,C,C_lsva,C_var,lambda,lambda_var,overlap,sweeps\n{}", rows.concat());
    write(out.csv("variational.csv", &csv))?;
    let gp = "set xlabel 'tau'\nset ylabel '|C|'\nset logscale y\n\
              plot 'variational.csv' using 2:(abs($3)) with lines title 'exact', \\\n     \
              '' using 2:(abs($4)) with points title 'LSVA', \\\n     \
              '' using 2:(abs($5)) with points title 'product ansatz'\n";
    write(out.gnuplot("variational.gp", gp))
}

fn spectrum(s: &Settings, out: &mut Output) -> Outcome {
    let spec = s.spec().cfg()?;
    let w_max = positive(s, "w_max")?;
    let delta: f64 = s.get("delta").cfg()?;
    let mode = match s.raw("mode").trim().to_ascii_lowercase().as_str() {
        "t" => Mode::T,
        "f" => Mode::F,
        other => return Err(Failure::config(format!("mode must be t or f, got '{other}'"))),
    };
    let direction = match s.raw("direction").trim().to_ascii_lowercase().as_str() {
        "left" => Direction::LeftMoving,
        "right" => Direction::RightMoving,
        other => return Err(Failure::config(format!("direction must be left or right, got '{other}'"))),
    };
    guard_dense(spec.q, w_max)?;
    let source = GateSource::from_spec(&spec).cfg()?;
    let ws: Vec<usize> = (1..=w_max).collect();
    let reports: Vec<SpectrumReport> = run_jobs(&ws, |&w| {
        let name = || format!("spectrum {} w={w}", tag(&spec));
        let op = Llg::new(direction, source.clone(), w, mode).job(name)?;
        let mut r = eigen_spectrum(&op, mode).job(name)?;
        r.clusters = cluster_eigenvalues(&r.eigenvalues, delta);
        Ok(r)
    })?;
    let mut recursion = String::from("w,z_re,z_im,a_w,a_w1,a_w2,a_tilde,inherited\n");
    for (i, r) in reports.iter().enumerate() {
        let w = i + 1;
        write(out.csv(&format!("spectrum_w{w}.csv"), &r.to_csv()))?;
        if w >= 3 {
            let rows = recursion_check(
                &reports[i - 2].clusters,
                &reports[i - 1].clusters,
                &r.clusters,
                &[C64::new(1.0, 0.0)],
                delta,
            );
            for row in rows {
                recursion.push_str(&format!(
                    "{w},{:.15e},{:.15e},{},{},{},{},{}\n",
                    row.z.re, row.z.im, row.a_w, row.a_w1, row.a_w2, row.a_tilde, row.inherited
                ));
            }
        }
    }
    write(out.csv("recursion.csv", &recursion))?;
    let doc: Vec<_> = reports.iter().enumerate().map(|(i, r)| json!({ "w": i + 1, "report": r })).collect();
    write(out.json("spectrum.json", json!(doc)))?;
    let gp = format!(
        "set size square\nset xlabel 'Re z'\nset ylabel 'Im z'\nset parametric\nset trange [0:2*pi]\n\
         plot cos(t), sin(t) with lines lc 'gray' notitle, \\\n     \
         for [w=1:{w_max}] sprintf('spectrum_w%d.csv', w) using 1:2 with points title sprintf('w = %d', w)\n"
    );
    write(out.gnuplot("spectrum.gp", &gp))
}

fn tailfit(s: &Settings, out: &mut Output) -> Outcome {
    let spec = s.spec().cfg()?;
    let w = positive(s, "w")?;
    let tau_max = positive(s, "tau_max")?;
    let mut starts = Vec::new();
    for raw in s.list("tau_start") {
        let t: usize = raw
            .parse()
            .map_err(|_| Failure::config(format!("bad window start '{raw}'")))?;
        if t == 0 || t + 3 > tau_max + 1 {
            return Err(Failure::config(format!("window start {t} leaves fewer than 3 points up to {tau_max}")));
        }
        starts.push(t);
    }
    guard_llg(spec.q, w)?;
    let name = || format!("tailfit {} w={w}", tag(&spec));
    let series = otoc_llg_left(&spec, w, tau_max).job(name)?;
    write(out.csv("tailfit_series.csv", &series.to_csv()))?;
    let data: Vec<(f64, f64)> = series.points.iter().map(|p| (p.tau as f64, p.value().norm().ln())).collect();
    let mut csv = String::from("tau_start,tau_end,points,phi,z2,constant,rms\n");
    let mut fits = Vec::new();
    for &t0 in &starts {
        let window = &data[t0 - 1..];
        let fit = tail_fit(window, window.len(), f64::INFINITY).job(name)?;
        csv.push_str(&format!(
            "{t0},{tau_max},{},{:.6},{:.8},{:.6},{:.3e}\n",
            fit.points, fit.phi, fit.z2, fit.constant, fit.rms
        ));
        fits.push(fit);
    }
    write(out.csv("tailfit.csv", &csv))?;
    let z2_generator = if spec.arrangement == Arrangement::Invariant {
        Some(subleading_eigenvalue(&spec, 1).job(name)?.norm())
    } else {
        None
    };
    let doc = json!({
        "model": spec.model.name(),
        "w": w,
        "fits": fits,
        "z2_generator_w1": z2_generator,
    });
    write(out.json("tailfit.json", doc))?;
    let first = &fits[0];
    let gp = format!(
        "set xlabel 'tau'\nset ylabel 'ln|C|'\n\
         f(x) = {:.10}*log(x) + x*log({:.10}) + {:.10}\n\
         plot 'tailfit_series.csv' using 5:(log(sqrt($9**2 + $10**2))) with points title 'w = {w}', \\\n     \
         [{}:{tau_max}] f(x) with lines title sprintf('phi = %.3f', {:.6})\n",
        first.phi, first.z2, first.constant, starts[0], first.phi
    );
    write(out.gnuplot("tailfit.gp", &gp))
}

fn avg_hrm(s: &Settings, out: &mut Output) -> Outcome {
    let q: usize = s.get("q").cfg()?;
    let w = positive(s, "w")?;
    let tau_max = positive(s, "tau_max")?;
    if q < 2 {
        return Err(Failure::config("q must be at least 2"));
    }
    let scale = (q as f64).powi(w as i32);
    let taus: Vec<usize> = (1..=tau_max).collect();
    let rows = run_jobs(&taus, |&tau| {
        let name = || format!("avg-hrm q={q} w={w} tau={tau}");
        let lam = hrm_leading_sv_exact(q, w, tau).job(name)?;
        let approx = f_tau(w as f64 / tau as f64, tau as f64, q).job(name)?;
        Ok(format!(
            "{tau},{:.6},{lam:.15e},{:.15e},{approx:.15e}\n",
            tau as f64 / w as f64,
            lam / scale
        ))
    })?;
    let csv = format!("tau,tau_over_w,lambda,lambda_scaled,f_tau\n{}", rows.concat());
    write(out.csv("avg_hrm.csv", &csv))?;
    let mut eig = String::from("eigenvalue,multiplicity\n");
    for (e, m) in hrm_eigenvalues(q, w) {
        eig.push_str(&format!("{e:.15e},{m}\n"));
    }
    write(out.csv("avg_hrm_eigen.csv", &eig))?;
    let r = ridge(q, w, tau_max).job(|| format!("avg-hrm ridge q={q} w={w}"))?;
    let doc = json!({
        "q": q,
        "w": w,
        "tau_max": tau_max,
        "ridge_tau_over_w": r,
        "expected_ridge": (q * q) as f64,
        "z2": z2_hrm(q),
        "butterfly_velocity": butterfly_velocity(q),
    });
    write(out.json("ridge.json", doc))?;
    let gp = format!(
        "set xlabel 'tau / w'\nset ylabel 'lambda / q^w'\nset arrow from {qq},0 to {qq},1 nohead dt 2\n\
         plot 'avg_hrm.csv' using 2:4 with lines title 'exact', '' using 2:5 with lines dt 3 title 'f_tau'\n",
        qq = q * q
    );
    write(out.gnuplot("avg_hrm.gp", &gp))
}

fn special(s: &Settings, out: &mut Output) -> Outcome {
    let q: usize = s.get("q").cfg()?;
    let seed: u64 = s.get("seed").cfg()?;
    let w_max = positive(s, "w_max")?;
    let tau_max = positive(s, "tau_max")?;
    guard_llg(q, w_max)?;
    let mut models = vec![Model::Localized];
    if q == 2 {
        models.insert(0, Model::Du);
    }
    let mut jobs = Vec::new();
    for &m in &models {
        let spec = GateSpec::new(m, q).with_seed(seed);
        spec.validate().cfg()?;
        for w in 1..=w_max {
            for tau in 1..=tau_max {
                jobs.push((spec.clone(), w, tau));
            }
        }
    }
    let rows = run_jobs(&jobs, |(spec, w, tau)| {
        let (w, tau) = (*w, *tau);
        let name = || format!("special {} w={w} tau={tau}", tag(spec));
        let op = Llg::left(spec, w, Mode::F).job(name)?;
        let tr = leading_singular_triplet(&LlgPower::new(op, tau), 1e-13, 5000, 0)
            .and_then(|t| t.require_converged())
            .job(name)?;
        let closed = match spec.model {
            Model::Du => du_closed_form(q, w, tau).norm_f,
            _ => localized_closed_form(q, w, tau).norm_f,
        };
        Ok(format!(
            "{},{w},{tau},{:.15e},{closed:.15e},{:.3e}\n",
            spec.model,
            tr.lambda,
            (tr.lambda - closed).abs()
        ))
    })?;
    let csv = format!("model,w,tau,lambda,lambda_closed,abs_err\n{}", rows.concat());
    write(out.csv("special.csv", &csv))?;
    let gp = "set xlabel 'tau'\nset ylabel 'lambda'\nset logscale y\n\
              plot 'special.csv' using 3:(strcol(1) eq 'du' ? $4 : 1/0) with points title 'du numeric', \\\n     \
              '' using 3:(strcol(1) eq 'du' ? $5 : 1/0) with lines title 'du closed form', \\\n     \
              '' using 3:(strcol(1) eq 'localized' && $4 > 0 ? $4 : 1/0) with points title 'localized numeric', \\\n     \
              '' using 3:(strcol(1) eq 'localized' && $5 > 0 ? $5 : 1/0) with lines title 'localized closed form'\n";
    write(out.gnuplot("special.gp", gp))
}

fn levelstats(s: &Settings, out: &mut Output) -> Outcome {
    let spec = s.spec().cfg()?;
    let l: usize = s.get("l").cfg()?;
    let seeds = positive(s, "seeds")?;
    let momentum: usize = s.get("momentum").cfg()?;
    let z2_even = match s.raw("z2").trim().to_ascii_lowercase().as_str() {
        "none" => None,
        "even" => Some(true),
        "odd" => Some(false),
        other => return Err(Failure::config(format!("z2 must be none, even or odd, got '{other}'"))),
    };
    let reference = match s.raw("reference").trim().to_ascii_lowercase().as_str() {
        "cue" => Ensemble::Cue,
        "coe" => Ensemble::Coe,
        other => return Err(Failure::config(format!("reference must be cue or coe, got '{other}'"))),
    };
    let power = positive(s, "power")?;
    let draws = positive(s, "draws")?;
    let bin: f64 = s.get("bin").cfg()?;
    let s_max: f64 = s.get("s_max").cfg()?;
    if !(bin > 0.0 && s_max > bin) {
        return Err(Failure::config("need 0 < bin < s_max"));
    }
    guard("Floquet chain", pow(spec.q, l), SECTOR_LIMIT)?;
    let sector = Sector { momentum, z2_even };
    let seed_list: Vec<u64> = (0..seeds as u64).map(|i| spec.seed + i).collect();
    let spectra = run_jobs(&seed_list, |&seed| {
        let spec = spec.clone().with_seed(seed);
        let name = || format!("levelstats {} L={l}", tag(&spec));
        let gate = build_gate(&spec, Position::new(0, 0)).job(name)?;
        sector_spacings(&gate, l, sector).job(name)
    })?;
    let block = spectra[0].phases.len();
    let pooled: Vec<f64> = spectra.iter().flat_map(|sp| sp.spacings.iter().copied()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_1e7e);
    let refs = sample_matrix_power_ensemble(reference, power, block, draws, &mut rng);
    let ks_ref = ks_two_sample(&pooled, &refs);
    let ks_poisson = ks_one_sample(&pooled, poisson_cdf);
    let ks_wigner = ks_one_sample(&pooled, wigner_unitary_cdf);
    write(out.csv("levelstats_hist.csv", &histogram_csv(&histogram(&pooled, bin, s_max))))?;
    write(out.csv("reference_hist.csv", &histogram_csv(&histogram(&refs, bin, s_max))))?;
    let doc = json!({
        "model": spec.model.name(),
        "l": l,
        "sector": sector,
        "block_dim": block,
        "spacings": pooled.len(),
        "reference": format!("{reference:?}^{power}"),
        "reference_spacings": refs.len(),
        "ks_reference": ks_ref,
        "ks_poisson": ks_poisson,
        "ks_wigner_unitary": ks_wigner,
    });
    write(out.json("levelstats.json", doc))?;
    let gp = "set xlabel 's'\nset ylabel 'P(s)'\nset style fill transparent solid 0.4\n\
              plot 'levelstats_hist.csv' using (($1+$2)/2):3 with boxes title 'circuit', \\\n     \
              'reference_hist.csv' using (($1+$2)/2):3 with lines title 'reference', \\\n     \
              exp(-x) with lines dt 2 title 'Poisson'\n";
    write(out.gnuplot("levelstats.gp", gp))
}

struct Check {
    name: &'static str,
    case: String,
    value: f64,
    tol: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.value <= self.tol
    }
}

fn verify(s: &Settings, out: &mut Output) -> Outcome {
    let q: usize = s.get("q").cfg()?;
    let w_max = positive(s, "w_max")?;
    let seed: u64 = s.get("seed").cfg()?;
    let tau_max = 3;
    guard_llg(q, w_max.max(tau_max))?;
    guard_bruteforce(q, w_max + tau_max - 1)?;
    let mut specs = Vec::new();
    for m in Model::ALL {
        if m.requires_qubits() && q != 2 {
            continue;
        }
        let spec = GateSpec::new(m, q).with_seed(seed);
        spec.validate().cfg()?;
        if m.is_random() {
            specs.push(spec.clone().with_arrangement(Arrangement::SpatialTemporalRandom));
        }
        specs.push(spec);
    }
    let jobs: Vec<(GateSpec, usize)> = specs
        .iter()
        .flat_map(|sp| (1..=w_max).map(move |w| (sp.clone(), w)))
        .collect();
    let checks = run_jobs(&jobs, |(spec, w)| verify_case(spec, *w, tau_max, seed))?;
    let checks: Vec<Check> = checks.into_iter().flatten().collect();
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass()).collect();
    let mut csv = String::from("check,case,value,tolerance,pass\n");
    for c in &checks {
        csv.push_str(&format!("{},{},{:.3e},{:.0e},{}\n", c.name, c.case, c.value, c.tol, c.pass()));
    }
    write(out.csv("verify.csv", &csv))?;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for c in &checks {
        let e = worst.entry(c.name).or_insert(0.0);
        *e = e.max(c.value);
    }
    let doc = json!({
        "q": q,
        "w_max": w_max,
        "checks": checks.len(),
        "failed": failed.iter().map(|c| format!("{} {}", c.name, c.case)).collect::<Vec<_>>(),
        "worst": worst,
    });
    write(out.json("verify.json", doc))?;
    let gp = "set ylabel 'value / tolerance'\nset logscale y\nset xtics rotate by 90\n\
              plot 'verify.csv' using 0:(($3 > 0 ? $3 : 1e-18)/$4):xtic(1) with points notitle\n";
    write(out.gnuplot("verify.gp", gp))?;
    if !failed.is_empty() {
        return Err(Failure {
            code: 3,
            message: format!(
                "job 'verify' failed: {} of {} checks, first: {} {}",
                failed.len(),
                checks.len(),
                failed[0].name,
                failed[0].case
            ),
        });
    }
    Ok(())
}

fn verify_case(spec: &GateSpec, w: usize, tau_max: usize, seed: u64) -> Outcome<Vec<Check>> {
    let name = || format!("verify {} w={w}", tag(spec));
    let case = format!("{} w={w}", tag(spec));
    let mut checks = Vec::new();

    // Left generator, right generator and brute force agree.
    let left = otoc_llg_left(spec, w, tau_max).job(name)?;
    let probes = BoundaryStates::default_probes(spec.q);
    for p in &left.points {
        let (x, t) = to_xt(w, p.tau);
        let bf = otoc_bruteforce_with(spec, &probes.sigma, &probes.nu, x, t as usize, None).job(name)?;
        let right = otoc_llg_right_with(spec, &probes, w, p.tau).job(name)?;
        let gap = (p.value() - bf).norm().max((p.value() - right).norm());
        checks.push(Check {
            name: "triple-equality",
            case: format!("{case} tau={}", p.tau),
            value: gap,
            tol: 1e-9,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(w as u64));
    let qf = spec.q as f64;
    for direction in [Direction::LeftMoving, Direction::RightMoving] {
        let dcase = format!("{case} {direction:?}");
        let op = Llg::new(direction, GateSource::from_spec(spec).cfg()?, w, Mode::T).job(name)?;
        let zeros = op.zeros_power();
        let ones = op.ones_power();
        let d0 = diff(&op.apply_at(&zeros, 1).job(name)?, &zeros);
        let d1 = diff(&op.apply_adjoint_at(&ones, 1).job(name)?, &ones);
        checks.push(Check {
            name: "fixed-points",
            case: dcase.clone(),
            value: d0.max(d1),
            tol: 1e-10,
        });
        let mut ratio = 0.0f64;
        for _ in 0..10 {
            let v = random_unit_vec(op.dim(), &mut rng);
            let tv = op.apply_at(&v, 1).job(name)?;
            let tdv = op.apply_adjoint_at(&v, 1).job(name)?;
            ratio = ratio.max(norm(&tv).max(norm(&tdv)) / qf);
        }
        checks.push(Check {
            name: "norm-bound",
            case: dcase.clone(),
            value: (ratio - 1.0).max(0.0),
            tol: 1e-12,
        });
        if spec.arrangement == Arrangement::Invariant {
            let mut worst = 0.0f64;
            for m in 1..w {
                let small = op.dim() / op.resized(m).job(name)?.dim();
                for _ in 0..5 {
                    let psi = random_unit_vec(small, &mut rng);
                    let (a, b) = op.reduce_check(m, &psi).job(name)?;
                    worst = worst.max(a).max(b);
                }
            }
            if w > 1 {
                checks.push(Check {
                    name: "reducibility",
                    case: dcase,
                    value: worst,
                    tol: 1e-10,
                });
            }
        }
    }
    // Keep the adjoint pairing honest on one random pair.
    let op = Llg::left(spec, w, Mode::T).job(name)?;
    let v = random_unit_vec(op.dim(), &mut rng);
    let x = random_unit_vec(op.dim(), &mut rng);
    let gap = (dot(&x, &op.apply_at(&v, 1).job(name)?) - dot(&op.apply_adjoint_at(&x, 1).job(name)?, &v)).norm();
    checks.push(Check {
        name: "adjointness",
        case,
        value: gap,
        tol: 1e-12,
    });
    Ok(checks)
}

fn diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

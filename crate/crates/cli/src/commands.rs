use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde_json::Value;

use singlab_core::growth::{
    estimate_order, estimate_type, indicator_profile, indicator_sandwich_check, sweep, GrowthKind,
};
use singlab_core::logderiv::{bound_sweep, covering_schedule, Bound};
use singlab_core::nevanlinna::{nevanlinna_sample, NevanlinnaSample};
use singlab_core::odegrowth::{
    construct_equation, equation_residual, gq_check, hyper_order_estimate, order_reduce, run_rays, Controls,
    ODEProblem, TraceStatus,
};
use singlab_core::report::{num, row, Report, RunConfig, SWEEP_COLUMNS};
use singlab_core::wiman::{self, central_index_curve, ci_order, laurent_coeffs, wv_sweep};
use singlab_core::{parse_fn, Error, FnExpr, Result};

use crate::{resolve_config, Common, Outcome};

const CONTRACT_TOL: f64 = 1e-8;

fn parse(src: &str) -> Result<FnExpr> {
    parse_fn(src).map_err(Error::from)
}

fn func(c: &Common) -> Result<FnExpr> {
    match &c.func {
        Some(s) => parse(s),
        None => Err(Error::InvalidArgument("--fn is required".into())),
    }
}

fn kind(s: &str) -> Result<GrowthKind> {
    s.parse()
}

/// A constant such as `1`, `-0.5*i` or `1+2*i`.
fn complex_const(src: &str) -> Result<Complex64> {
    let f = parse(src)?;
    if !f.is_constant() {
        return Err(Error::InvalidArgument(format!("expected a constant, got {src:?}")));
    }
    Ok(f.eval_raw(Complex64::new(1.0, 0.0))?.to_complex())
}

fn sample_row(s: &NevanlinnaSample) -> serde_json::Map<String, Value> {
    row([
        ("r", num(s.r)),
        ("m0", num(s.m0)),
        ("N0", num(s.n0)),
        ("T0", num(s.t0)),
        ("logM0_ln", num(s.log_m0)),
    ])
}

fn finish(rep: &Report, cfg: &RunConfig, stem: &str, summary: String) -> Result<()> {
    rep.write(&cfg.output_dir, stem)?;
    println!("{summary}");
    Ok(())
}

pub fn nevanlinna(c: &Common, r: Option<f64>, outer: f64) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let f = func(c)?;
    let mut rep = Report::new("nevanlinna", &cfg);
    rep.input("fn", f.to_string()).input("R_outer", outer);
    rep.set_columns(&SWEEP_COLUMNS);
    let samples = match r {
        Some(r) => vec![nevanlinna_sample(&f, r, outer, &cfg.grid, &cfg.precision)?],
        None => sweep(&f, outer, &cfg.schedule, &cfg.grid, &cfg.precision)?,
    };
    for s in &samples {
        rep.push_row(sample_row(s));
    }
    let s = samples.last().expect("at least one radius");
    let summary = format!(
        "r={} m0={} N0={} T0={} logM0_ln={} ({} radii)",
        s.r,
        s.m0,
        s.n0,
        s.t0,
        s.log_m0,
        samples.len()
    );
    finish(&rep, &cfg, "nevanlinna", summary)?;
    Ok(Outcome::Ok)
}

pub fn order(c: &Common, kind_s: &str, level: u32, outer: f64) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let f = func(c)?;
    let k = kind(kind_s)?;
    let samples = sweep(&f, outer, &cfg.schedule, &cfg.grid, &cfg.precision)?;
    let est = estimate_order(&samples, level, k)?;
    let mut rep = Report::new("order", &cfg);
    rep.input("fn", f.to_string()).input("kind", k).input("level", level);
    rep.input("R_outer", outer);
    rep.set_columns(&SWEEP_COLUMNS);
    samples.iter().for_each(|s| rep.push_row(sample_row(s)));
    rep.estimate("order", &est);
    let tau = est.tau.map_or("n/a".to_string(), |t| t.to_string());
    finish(&rep, &cfg, "order", format!("sigma={} tau={tau} kind={kind_s} level={level}", est.sigma))?;
    Ok(Outcome::Ok)
}

pub fn type_(c: &Common, kind_s: &str, sigma: Option<f64>, outer: f64) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let f = func(c)?;
    let k = kind(kind_s)?;
    let samples = sweep(&f, outer, &cfg.schedule, &cfg.grid, &cfg.precision)?;
    let sigma = match sigma {
        Some(s) => s,
        None => estimate_order(&samples, 1, k)?.sigma,
    };
    let tau = estimate_type(&samples, sigma, k)?;
    let mut rep = Report::new("type", &cfg);
    rep.input("fn", f.to_string()).input("kind", k).input("R_outer", outer);
    rep.set_columns(&SWEEP_COLUMNS);
    samples.iter().for_each(|s| rep.push_row(sample_row(s)));
    rep.estimate("sigma", sigma).estimate("tau", tau);
    finish(&rep, &cfg, "type", format!("tau={tau} sigma={sigma} kind={kind_s}"))?;
    Ok(Outcome::Ok)
}

pub struct BoundArgs {
    pub name: String,
    pub alpha: f64,
    pub sigma: Option<f64>,
    pub eps: f64,
    pub level: u32,
}

impl BoundArgs {
    fn bound(&self) -> Result<Bound> {
        let sigma = || {
            self.sigma
                .ok_or_else(|| Error::InvalidArgument(format!("--sigma is required for {}", self.name)))
        };
        let b = match self.name.to_ascii_lowercase().as_str() {
            "th1" => Bound::Th1 { alpha: self.alpha },
            "coro1" => Bound::Coro1 {
                sigma: sigma()?,
                eps: self.eps,
            },
            "coro2" => Bound::Coro2 {
                sigma: sigma()?,
                eps: self.eps,
                n: self.level,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "--bound must be th1, coro1 or coro2, got {other:?}"
                )))
            }
        };
        b.validate()?;
        Ok(b)
    }
}

pub fn logderiv_check(
    c: &Common,
    k: usize,
    b: &BoundArgs,
    phi: Option<f64>,
    max_measure: Option<f64>,
    outer: f64,
) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let f = func(c)?;
    let bound = b.bound()?;
    let samples = match bound {
        Bound::Th1 { alpha } => sweep(
            &f,
            outer,
            &covering_schedule(&cfg.schedule, alpha),
            &cfg.grid,
            &cfg.precision,
        )?,
        _ => Vec::new(),
    };
    let res = bound_sweep(&f, k, &bound, phi, &cfg.schedule, &samples, &cfg.precision)?;
    let mut rep = Report::new("logderiv-check", &cfg);
    rep.input("fn", f.to_string()).input("k", k).input("bound", bound);
    rep.input("phi", phi);
    rep.set_columns(&SWEEP_COLUMNS);
    for w in &res.rows {
        let mut r = row([
            ("r", num(w.r)),
            ("logderiv_max_ln", num(w.logderiv_max_ln)),
            ("bound_ln", w.bound_ln.map_or(Value::Null, num)),
            ("violation_flag", Value::Bool(w.violation)),
            ("calibration", Value::Bool(w.calibration)),
        ]);
        if let Some(s) = samples.iter().find(|s| s.r == w.r) {
            r.extend(sample_row(s));
        }
        rep.push_row(r);
    }
    rep.violations = res.violating_radii.len();
    rep.estimate("fitted_c", res.fitted_c)
        .estimate("log_measure", res.log_measure)
        .estimate("total_log_measure", res.total_log_measure);
    let failed = max_measure.is_some_and(|m| res.log_measure > m);
    finish(
        &rep,
        &cfg,
        "logderiv-check",
        format!(
            "{} k={k}: {} violating radii, log measure {} of {}{}",
            bound.name(),
            res.violating_radii.len(),
            res.log_measure,
            res.total_log_measure,
            if failed { " (exceeds limit)" } else { "" }
        ),
    )?;
    Ok(if failed { Outcome::Violated } else { Outcome::Ok })
}

pub fn indicator(
    c: &Common,
    a_src: &str,
    n: u32,
    phi: Option<f64>,
    eps: Option<f64>,
    angles: usize,
) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let a = complex_const(a_src)?;
    let mut rep = Report::new("indicator", &cfg);
    rep.input("a", [a.re, a.im]).input("n", n);
    match (phi, eps) {
        (Some(phi), Some(eps)) => {
            let pre = match &c.func {
                Some(s) => parse(s)?,
                None => FnExpr::constant(Complex64::new(1.0, 0.0)),
            };
            let res = indicator_sandwich_check(&pre, a, n, phi, eps, &cfg.schedule, &cfg.precision)?;
            rep.input("prefactor", pre.to_string()).input("phi", phi).input("eps", eps);
            rep.set_columns(&["r", "logmag_ln", "lower_ln", "upper_ln", "violation_flag"]);
            for w in &res.rows {
                rep.push_row(row([
                    ("r", num(w.r)),
                    ("logmag_ln", num(w.logmag)),
                    ("lower_ln", num(w.lower)),
                    ("upper_ln", num(w.upper)),
                    ("violation_flag", Value::Bool(!w.holds)),
                ]));
            }
            rep.violations = res.violations.len();
            rep.estimate("delta", res.delta).estimate("r0", res.r0);
            let r0 = res.r0.map_or("none".to_string(), |r| r.to_string());
            finish(
                &rep,
                &cfg,
                "indicator",
                format!("delta={} r0={r0} violations={}", res.delta, res.violations.len()),
            )?;
            Ok(if res.r0.is_none() {
                Outcome::Violated
            } else {
                Outcome::Ok
            })
        }
        (None, None) => {
            let prof = indicator_profile(a, n, angles)?;
            rep.set_columns(&["phi", "delta"]);
            for &(p, d) in &prof.samples {
                rep.push_row(row([("phi", num(p)), ("delta", num(d))]));
            }
            rep.estimate("critical_angles", &prof.critical_angles);
            let crit: Vec<String> = prof.critical_angles.iter().map(|x| format!("{x:.6}")).collect();
            finish(&rep, &cfg, "indicator", format!("critical angles: {}", crit.join(" ")))?;
            Ok(Outcome::Ok)
        }
        _ => Err(Error::InvalidArgument("--phi and --eps must be given together".into())),
    }
}

pub fn central_index(c: &Common, trunc: usize, r: Option<f64>, level: u32) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let f = func(c)?;
    let data = laurent_coeffs(&f, trunc, None)?;
    let curve = central_index_curve(&data, &cfg.schedule)?;
    let ord = ci_order(&curve, level)?;
    let mut rep = Report::new("central-index", &cfg);
    rep.input("fn", f.to_string()).input("trunc", trunc).input("level", level);
    rep.set_columns(&["r", "V0"]);
    for &(r, v) in &curve.samples {
        rep.push_row(row([("r", num(r)), ("V0", Value::from(v))]));
    }
    rep.estimate("ci_order", ord);
    let mut summary = format!("ci_order={ord} level={level}");
    if let Some(r) = r {
        let v = wiman::central_index(&data, r)?;
        rep.estimate("V0_at_r", [r, v as f64]);
        summary = format!("V0({r})={v} {summary}");
    }
    finish(&rep, &cfg, "central-index", summary)?;
    Ok(Outcome::Ok)
}

pub fn wv_check(c: &Common, j: usize, trunc: usize) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let f = func(c)?;
    let data = laurent_coeffs(&f, trunc, None)?;
    let rows = wv_sweep(&f, j, &cfg.schedule, &data, &cfg.grid, &cfg.precision)?;
    let mut rep = Report::new("wv-check", &cfg);
    rep.input("fn", f.to_string()).input("j", j).input("trunc", trunc);
    rep.set_columns(&["r", "V0", "z_re", "z_im", "rho", "rho_ln", "flagged"]);
    for w in &rows {
        rep.push_row(row([
            ("r", num(w.r)),
            ("V0", Value::from(w.v0)),
            ("z_re", num(w.z_r.re)),
            ("z_im", num(w.z_r.im)),
            ("rho", num(w.rho)),
            ("rho_ln", num(w.ln_rho)),
            ("flagged", Value::Bool(w.flagged)),
        ]));
    }
    let flagged = rows.iter().filter(|w| w.flagged).count();
    rep.violations = flagged;
    let last = rows.last().expect("schedule is non-empty");
    finish(
        &rep,
        &cfg,
        "wv-check",
        format!("rho_{j}({})={} flagged={flagged} of {}", last.r, last.rho, rows.len()),
    )?;
    Ok(Outcome::Ok)
}

fn parse_rays(s: Option<&str>) -> Result<Vec<f64>> {
    match s {
        None => Ok((0..12).map(|j| -PI + PI * j as f64 / 6.0).collect()),
        Some(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::InvalidArgument(format!("--rays: bad angle {t:?}")))
            })
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ode_growth(
    c: &Common,
    eq: &str,
    rays: Option<&str>,
    rstart: f64,
    rend: f64,
    rtol: f64,
    samples: usize,
    refine: bool,
) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let p: ODEProblem = eq.parse()?;
    let rays = parse_rays(rays)?;
    let controls = Controls {
        rtol,
        samples,
        ..Controls::default()
    };
    let traces = run_rays(&p, &rays, rstart, rend, &controls)?;
    let est = hyper_order_estimate(&traces)?;

    let mut rep = Report::new("ode-growth", &cfg);
    rep.input("eq", p.to_string())
        .input("rays", &rays)
        .input("rstart", rstart)
        .input("rend", rend)
        .input("controls", controls);
    rep.set_columns(&["phi", "r", "log_abs_f", "u_ln", "u_arg", "drift", "swaps"]);
    for t in &traces {
        for s in &t.samples {
            rep.push_row(row([
                ("phi", num(t.phi)),
                ("r", num(s.r)),
                ("log_abs_f", num(s.log_abs_f)),
                ("u_ln", num(s.u.logmag)),
                ("u_arg", num(s.u.phase)),
                ("drift", num(s.drift)),
                ("swaps", Value::from(s.swaps)),
            ]));
        }
    }
    let storms = traces.iter().filter(|t| t.status == TraceStatus::PoleStorm).count();
    let statuses: Vec<(f64, TraceStatus)> = traces.iter().map(|t| (t.phi, t.status)).collect();
    rep.estimate("hyper_order", &est).estimate("status", statuses);

    let mut summary = format!("sigma2={} rays={} pole_storms={storms}", est.estimate.sigma, traces.len());
    let mut outcome = if storms > 0 { Outcome::Numeric } else { Outcome::Ok };
    if refine {
        let fine = Controls {
            rtol: rtol / 2.0,
            samples: 2 * samples - 1,
            ..controls
        };
        let est2 = hyper_order_estimate(&run_rays(&p, &rays, rstart, rend, &fine)?)?;
        let diff = (est2.estimate.sigma - est.estimate.sigma).abs();
        rep.estimate("refined", &est2).estimate("refinement_gap", diff);
        summary.push_str(&format!(" refined={} gap={diff:.3e}", est2.estimate.sigma));
        if diff > 0.05 {
            rep.violations = 1;
            outcome = Outcome::Violated;
        }
    }
    finish(&rep, &cfg, "ode-growth", summary)?;
    Ok(outcome)
}

pub fn reduce(c: &Common, solutions: &str, eq: Option<&str>, q: usize) -> Result<Outcome> {
    let cfg = resolve_config(c)?;
    let sols = solutions.split(';').map(parse).collect::<Result<Vec<_>>>()?;
    let p = match eq {
        Some(e) => e.parse::<ODEProblem>()?,
        None => construct_equation(&sols)?,
    };
    let base = sols
        .iter()
        .map(|f| equation_residual(&p, f))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let step = order_reduce(&p, &sols, q)?;
    let dev = gq_check(&p, &sols, q)?;
    let mut rep = Report::new("reduce", &cfg);
    rep.input("solutions", sols.iter().map(|f| f.to_string()).collect::<Vec<_>>())
        .input("eq", p.to_string())
        .input("q", q);
    rep.set_columns(&["j", "A_qj"]);
    for (j, a) in step.reduced_coeffs.iter().enumerate() {
        rep.push_row(row([("j", Value::from(j)), ("A_qj", Value::from(a.to_string()))]));
    }
    rep.estimate("equation_residual", base)
        .estimate("reduction_residual", step.residual)
        .estimate("gq_deviation", dev);
    let bad = base > CONTRACT_TOL || step.residual > CONTRACT_TOL || dev > CONTRACT_TOL;
    rep.violations = usize::from(bad);
    finish(
        &rep,
        &cfg,
        "reduce",
        format!(
            "q={q} equation_residual={base:.3e} reduction_residual={:.3e} gq_deviation={dev:.3e}",
            step.residual
        ),
    )?;
    Ok(if bad { Outcome::Violated } else { Outcome::Ok })
}

pub fn rerender(input: &Path, out: Option<&Path>) -> Result<Outcome> {
    let text = fs::read_to_string(input)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", input.display())))?;
    let rep = Report::from_json(&text)?;
    let dest = out.map_or_else(|| input.with_extension("csv"), Path::to_path_buf);
    fs::write(&dest, rep.to_csv()?)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", dest.display())))?;
    println!("wrote {} ({} rows)", dest.display(), rep.rows.len());
    Ok(Outcome::Ok)
}

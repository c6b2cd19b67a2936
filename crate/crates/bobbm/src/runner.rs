//! Experiment dispatch: validate a config, run the named experiment, persist
//! a [`RunRecord`] (JSON-lines), a CSV summary, and optionally an SVG plot.
//!
//! Output files share the config's `out` prefix: `<out>.jsonl`, `<out>.csv`,
//! `<out>.svg`. Estimates in a record are bit-reproducible from the echoed
//! config and seed; timings are not part of that contract.

use std::fmt::Write as _;
use std::time::Instant;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::density::{
    ball_mass_mc, change_of_variables_test, choose_ball_radius, density_lp_norm_mc,
    exp_moment_mc, OrientationDecision, TestFunctional,
};
use crate::dynamics::{divergence_fd, flow_trajectory, write_trajectory_jsonl};
use crate::gaussian::GaussianSpec;
use crate::plot::{write_svg, PlotSpec, Series};
use crate::qi::{
    admissible_params, qi_halfcase_ratio, qi_scaling_fit, qi_second_moment_bruteforce,
    qi_second_moment_exact, ExponentSchedule, KernelVariant, QiKernel,
};
use crate::record::{Estimate, RunRecord};
use crate::spectral::multiply;
use crate::trilinear::{q_full, q_full_direct, q_split};
use crate::{Error, Result};

/// Run the experiment named by `config.kind`, persisting outputs when an
/// `out` prefix is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let mut record = RunRecord::new(config);
    let mut csv = String::new();
    let mut plot: Option<PlotSpec> = None;
    match config.kind {
        ExperimentKind::Simulate => run_simulate(config, &mut record, &mut csv)?,
        ExperimentKind::QiScan => plot = Some(run_qi_scan(config, &mut record, &mut csv)?),
        ExperimentKind::Density => plot = Some(run_density(config, &mut record, &mut csv)?),
        ExperimentKind::ExpMoment => plot = Some(run_exp_moment(config, &mut record, &mut csv)?),
        ExperimentKind::Exponents => plot = Some(run_exponents(config, &mut record, &mut csv)?),
        ExperimentKind::Validate => run_validate(config, &mut record, &mut csv)?,
    }
    record.time("total", start.elapsed().as_secs_f64() * 1e3);
    if let Some(prefix) = &config.out {
        let jsonl = prefix.with_extension("jsonl");
        record.append_jsonl(&jsonl)?;
        let csv_path = prefix.with_extension("csv");
        std::fs::write(&csv_path, &csv).map_err(|e| Error::OutputWrite {
            path: csv_path.display().to_string(),
            source: e,
        })?;
        if config.plot {
            if let Some(spec) = &plot {
                write_svg(spec, &prefix.with_extension("svg"))?;
            }
        }
    }
    Ok(record)
}

fn spec_of(config: &ExperimentConfig, n: usize) -> GaussianSpec {
    GaussianSpec::new(config.s, n, config.seed)
}

fn resolve_radius(config: &ExperimentConfig, n: usize) -> f64 {
    if config.radius > 0.0 {
        config.radius
    } else {
        choose_ball_radius(&spec_of(config, n), 0.6, 4000)
    }
}

fn run_simulate(
    config: &ExperimentConfig,
    record: &mut RunRecord,
    csv: &mut String,
) -> Result<()> {
    let n = config.n;
    let spec = spec_of(config, n);
    let u = spec.sample(0);
    let traj = flow_trajectory(&u, config.t, n, &config.flow_params())?;
    let e0 = traj.states.first().unwrap().energy();
    let drift = traj
        .states
        .iter()
        .map(|v| (v.energy() - e0).abs() / e0.max(1e-300))
        .fold(0.0, f64::max);
    record.push("energy_initial", Estimate::exact(e0));
    record.push("energy_final", Estimate::exact(traj.states.last().unwrap().energy()));
    record.push("max_rel_energy_drift", Estimate::exact(drift));
    record.push("divergence_fd", Estimate::exact(divergence_fd(&u, n.min(16), 1e-5)));
    csv.push_str("s,N,t,energy_initial,energy_final,max_rel_energy_drift\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{}",
        config.s,
        n,
        config.t,
        e0,
        traj.states.last().unwrap().energy(),
        drift
    );
    if let Some(prefix) = &config.out {
        write_trajectory_jsonl(&traj, &prefix.with_extension("traj.jsonl"))?;
    }
    Ok(())
}

fn run_qi_scan(
    config: &ExperimentConfig,
    record: &mut RunRecord,
    csv: &mut String,
) -> Result<PlotSpec> {
    let t = config.t;
    let cutoffs = config.cutoffs();
    let values: Vec<(usize, f64)> = cutoffs
        .iter()
        .map(|&n| {
            let kernel = QiKernel::new(config.variant, config.s, n);
            (n, qi_second_moment_exact(&kernel, t))
        })
        .collect();
    let (slope, residual) = if config.variant == KernelVariant::Full
        && values.len() >= 2
        && config.s > 0.0
        && t != 0.0
    {
        let fit = qi_scaling_fit(config.s, t, &cutoffs)?;
        (fit.slope, fit.residual)
    } else {
        (f64::NAN, f64::NAN)
    };
    csv.push_str("s,N,t,variant,qi_value,fit_slope,fit_residual\n");
    for &(n, v) in &values {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            config.s, n, t, config.variant, v, slope, residual
        );
        record.push(&format!("qi_n{n}"), Estimate::exact(v));
    }
    if slope.is_finite() {
        record.push("fit_slope", Estimate::exact(slope));
        record.push("fit_residual", Estimate::exact(residual));
    }
    if (config.s - 0.5).abs() < 1e-12 && values.len() >= 2 {
        for (n, ratio) in qi_halfcase_ratio(t, &cutoffs)? {
            record.push(&format!("halfcase_ratio_n{n}"), Estimate::exact(ratio));
        }
    }
    Ok(PlotSpec {
        title: format!("QI scan: s={}, t={}, kernel {}", config.s, t, config.variant),
        x_label: "N".into(),
        y_label: "QI / t^2".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: format!("s={}", config.s),
            points: values.iter().map(|&(n, v)| (n as f64, v / (t * t))).collect(),
        }],
    })
}

fn run_density(
    config: &ExperimentConfig,
    record: &mut RunRecord,
    csv: &mut String,
) -> Result<PlotSpec> {
    let cutoffs = config.cutoffs();
    let radius = resolve_radius(config, *cutoffs.iter().max().unwrap());
    record.push("radius", Estimate::exact(radius));
    csv.push_str("s,N,t,p,lp_norm,lp_std_error,ball_mass,ball_mass_se,window_product\n");
    let mut points = Vec::new();
    for &n in &cutoffs {
        let spec = spec_of(config, n);
        let lp = density_lp_norm_mc(
            &spec,
            config.t,
            config.p,
            radius,
            &config.flow_params(),
            config.samples,
        )?;
        let mass = ball_mass_mc(&spec, radius, config.samples)?;
        record.push(
            &format!("lp_norm_n{n}"),
            Estimate::new(lp.lp_norm, lp.std_error, config.samples),
        );
        record.push(&format!("ball_mass_n{n}"), mass.clone());
        record.push(&format!("window_product_n{n}"), Estimate::exact(lp.window_product));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            config.s,
            n,
            config.t,
            config.p,
            lp.lp_norm,
            lp.std_error,
            mass.value,
            mass.std_error,
            lp.window_product
        );
        points.push((n as f64, lp.lp_norm));
    }
    Ok(PlotSpec {
        title: format!(
            "density L^p norm: s={}, t={}, p={}, R={radius:.3}",
            config.s, config.t, config.p
        ),
        x_label: "N".into(),
        y_label: "||f_t 1_B||_p".into(),
        log_x: true,
        log_y: false,
        series: vec![Series { label: "lp_norm".into(), points }],
    })
}

fn run_exp_moment(
    config: &ExperimentConfig,
    record: &mut RunRecord,
    csv: &mut String,
) -> Result<PlotSpec> {
    let cutoffs = config.cutoffs();
    let radius = resolve_radius(config, *cutoffs.iter().max().unwrap());
    record.push("radius", Estimate::exact(radius));
    csv.push_str("s,N,lambda,radius,estimate,std_error,max_abs_q,censored\n");
    let mut points = Vec::new();
    for &n in &cutoffs {
        let spec = spec_of(config, n);
        let est = exp_moment_mc(&spec, config.lambda, radius, config.samples)?;
        record.push(&format!("exp_moment_n{n}"), est.estimate.clone());
        record.push(&format!("max_abs_q_n{n}"), Estimate::exact(est.max_abs_q));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            config.s,
            n,
            config.lambda,
            radius,
            est.estimate.value,
            est.estimate.std_error,
            est.max_abs_q,
            est.censored
        );
        points.push((n as f64, est.estimate.value));
    }
    Ok(PlotSpec {
        title: format!("exp moment: s={}, lambda={}, R={radius:.3}", config.s, config.lambda),
        x_label: "N".into(),
        y_label: "E exp(lambda |Q| 1_B)".into(),
        log_x: true,
        log_y: false,
        series: vec![Series { label: "exp_moment".into(), points }],
    })
}

fn run_exponents(
    config: &ExperimentConfig,
    record: &mut RunRecord,
    csv: &mut String,
) -> Result<PlotSpec> {
    let r_ball = if config.radius > 0.0 { config.radius } else { 1.0 };
    let params = admissible_params(config.r1, config.c0, r_ball, config.exp_p)?;
    let sched = ExponentSchedule::new(config.exp_p, config.r1, params.tau_r)?;
    record.push("p_min", Estimate::exact(params.p_min));
    record.push("tau_r", Estimate::exact(params.tau_r));
    record.push("q0", Estimate::exact(sched.integrability_exponent(0.0)?));
    csv.push_str("j,t_j,r_j,q_t\n");
    let mut points = Vec::new();
    for j in 1..=config.j_max {
        let tj = j as f64 * params.tau_r;
        let rj = sched.r_j(j)?;
        let qt = sched.integrability_exponent(tj)?;
        let _ = writeln!(csv, "{j},{tj},{rj},{qt}");
        points.push((tj, rj));
        if j == config.j_max {
            record.push("r_j_max", Estimate::exact(rj));
        }
    }
    Ok(PlotSpec {
        title: format!("exponent schedule: p={}, r1={}", config.exp_p, config.r1),
        x_label: "t_j".into(),
        y_label: "r_j".into(),
        log_x: false,
        log_y: false,
        series: vec![Series { label: "r_j".into(), points }],
    })
}

struct Battery<'a> {
    record: &'a mut RunRecord,
    csv: &'a mut String,
    passed: u32,
    total: u32,
}

impl Battery<'_> {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.total += 1;
        if ok {
            self.passed += 1;
            println!("PASS  {name}: {detail}");
        } else {
            println!("FAIL  {name}: {detail}");
        }
        let _ = writeln!(self.csv, "{name},{},{detail}", if ok { "pass" } else { "fail" });
        self.record.push(&format!("check_{name}"), Estimate::exact(f64::from(ok)));
    }
}

/// The `validate` kind: a quick pass over the structural invariants (exact
/// identities, backend agreement, conservation, Wick closed form, the
/// change-of-variables orientation) with one PASS/FAIL line each.
fn run_validate(
    config: &ExperimentConfig,
    record: &mut RunRecord,
    csv: &mut String,
) -> Result<()> {
    csv.push_str("check,status,detail\n");
    let mut b = Battery { record, csv, passed: 0, total: 0 };
    let params = config.flow_params();

    // exact product backends
    let spec = GaussianSpec::new(0.75, 24, config.seed);
    let u = spec.sample(0);
    let fast = multiply(&u, &u);
    let slow = crate::spectral::multiply_direct(&u, &u);
    let d = fast.rel_distance(&slow);
    b.check("product_backends", d < 1e-12, format!("rel diff {d:.2e}"));

    // trilinear hand value and split identity
    let hand = crate::spectral::FourierField::from_coeffs(vec![
        num_complex::Complex64::new(1.0, 0.0),
        num_complex::Complex64::new(0.0, -1.0),
    ]);
    let q = q_full(&hand, 0.5, 2);
    b.check("q_hand_value", (q + 10.0 / 3.0).abs() < 1e-12, format!("q = {q}"));
    let (q1, q2) = q_split(&u, 0.75, 24);
    let qd = q_full_direct(&u, 0.75, 24);
    let rel = ((q1 + q2) - qd).abs() / qd.abs().max(1e-300);
    b.check("q_split_identity", rel < 1e-10, format!("rel residual {rel:.2e}"));

    // energy conservation over a short run
    let traj = flow_trajectory(&spec.sample(1), 0.5f64.min(config.max_t), 24, &params)?;
    let e0 = traj.states[0].energy();
    let drift = traj
        .states
        .iter()
        .map(|v| (v.energy() - e0).abs() / e0)
        .fold(0.0, f64::max);
    b.check("energy_conservation", drift <= 1e-8, format!("max rel drift {drift:.2e}"));

    // Liouville
    let div = divergence_fd(&spec.sample(2), 8, 1e-5);
    b.check("liouville_divergence", div.abs() <= 1e-6, format!("divergence {div:.2e}"));

    // Wick closed form and brute force
    let k = QiKernel::new(KernelVariant::Q1Sym, 0.5, 2);
    let qi = qi_second_moment_exact(&k, 0.5);
    let closed = 72.0 * (1.0 - (0.5f64 / 3.0).cos());
    b.check(
        "wick_closed_form",
        (qi - closed).abs() <= 1e-12 * closed,
        format!("{qi} vs {closed}"),
    );
    let k = QiKernel::new(KernelVariant::Full, 0.45, 4);
    let fast = qi_second_moment_exact(&k, 0.7);
    let brute = qi_second_moment_bruteforce(&k, 0.7);
    b.check(
        "wick_bruteforce",
        (fast - brute).abs() <= 1e-12 * brute.abs(),
        format!("{fast} vs {brute}"),
    );

    // exponent arithmetic
    let sched = ExponentSchedule::new(2.0, 1.25, 0.6)?;
    let mut worst = 0.0f64;
    for j in 1..=64 {
        let c = sched.r_j(j)?;
        let r = sched.r_j_recursive(j);
        worst = worst.max((c - r).abs() / r);
    }
    b.check("exponent_schedule", worst <= 1e-12, format!("max rel diff {worst:.2e}"));

    // reproducibility of a small Monte Carlo
    let est1 = exp_moment_mc(&spec, 0.05, 3.0, 500)?;
    let est2 = exp_moment_mc(&spec, 0.05, 3.0, 500)?;
    b.check(
        "reproducibility",
        est1.estimate == est2.estimate,
        format!("{} vs {}", est1.estimate.value, est2.estimate.value),
    );

    // change-of-variables orientation
    let cov_spec = GaussianSpec::new(config.s, config.n, config.seed);
    let radius = resolve_radius(config, config.n);
    let report = change_of_variables_test(
        &cov_spec,
        config.t.max(0.2),
        radius,
        &params,
        config.samples,
        &TestFunctional::standard(),
    )?;
    let (ok, detail) = match report.decision {
        OrientationDecision::Resolved(o) => (true, format!("orientation {o:+}")),
        OrientationDecision::BothPass => (false, "both orientations pass".into()),
        OrientationDecision::NeitherPass => (false, "neither orientation passes".into()),
    };
    b.check("cov_orientation", ok, detail);
    if let OrientationDecision::Resolved(o) = report.decision {
        b.record.push("orientation", Estimate::exact(f64::from(o)));
    }

    let (passed, total) = (b.passed, b.total);
    record.push("checks_passed", Estimate::exact(f64::from(passed)));
    record.push("checks_total", Estimate::exact(f64::from(total)));
    println!("validate: {passed}/{total} checks passed");
    Ok(())
}

//! Property suites behind `verify-schedules`, `verify-variance` and `gradcheck`.

use adamnx_core::noiselab::{
    closed_form_exp, closed_form_var, mc_moments, mc_moments_paired, ChainMode, Horizon, NoiseError, NoiseModel,
};
use adamnx_core::problems::{
    fd_gradient, make_blobs, relative_error, Batch, LogReg, Mlp, Problem, Quadratic, Rosenbrock, DEFAULT_FD_STEP,
};
use adamnx_core::schedules::{beta1_hat, DecayFamily, DecaySchedule, DEFAULT_BETA1};
use adamnx_core::{Rng, Tensor};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            detail: detail.into(),
            pass,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

pub fn render_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "{:<width$}  {}  {}\n",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    out
}

/// Every `t` up to 1000, then `per_decade` log-spaced values per decade up to `max`.
pub fn log_dense_steps(max: u64, per_decade: usize) -> Vec<u64> {
    let mut ts: Vec<u64> = (1..=max.min(1000)).collect();
    if max > 1000 {
        let decades = (max as f64).log10() - 3.0;
        let n = (decades * per_decade as f64).ceil() as usize;
        for i in 1..=n {
            let t = (1000.0 * 10f64.powf(i as f64 / per_decade as f64)).round() as u64;
            ts.push(t.min(max));
        }
    }
    ts.dedup();
    ts
}

pub fn schedule_checks() -> Vec<Check> {
    let mut checks = Vec::new();
    let families = [
        DecaySchedule::adam_classic(),
        DecaySchedule::adamnx(),
        DecaySchedule::adax(),
        DecaySchedule::adafactor(),
    ];
    for s in &families {
        let v = s.beta2_hat(1);
        checks.push(Check::new(
            format!("{}: beta2_hat(1) == 0", s.family().name()),
            v == 0.0,
            format!("{v:e}"),
        ));
    }

    let ts = log_dense_steps(1_000_000, 200);
    let nx = DecaySchedule::adamnx();
    let comp: Vec<f64> = ts.iter().map(|&t| nx.beta2_hat_complement(t)).collect();
    let strictly = comp.windows(2).all(|w| w[1] < w[0]);
    let vals: Vec<f64> = ts.iter().map(|&t| nx.beta2_hat(t)).collect();
    let monotone = vals.windows(2).all(|w| w[1] >= w[0]);
    checks.push(Check::new(
        "adamnx: 1 - beta2_hat strictly decreasing on 1..1e6",
        strictly,
        format!("{} sampled steps, last 1 - beta2_hat = {:e}", ts.len(), comp[comp.len() - 1]),
    ));
    checks.push(Check::new(
        "adamnx: beta2_hat nondecreasing in f64",
        monotone,
        String::new(),
    ));
    let worst = ts
        .iter()
        .zip(&vals)
        .filter(|(&t, _)| t >= 100_000)
        .map(|(_, v)| (v - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "adamnx: |beta2_hat - 1| < 1e-6 for t >= 1e5",
        worst < 1e-6,
        format!("max {worst:e}"),
    ));

    let mut worst_gap = f64::INFINITY;
    let mut dominated = true;
    for &t in &ts {
        let b1 = beta1_hat(DEFAULT_BETA1, t).expect("valid beta1");
        let b2 = nx.beta2_hat(t);
        worst_gap = worst_gap.min(b2 - b1);
        dominated &= b2 >= b1;
    }
    checks.push(Check::new(
        "adamnx: beta2_hat >= beta1_hat at defaults",
        dominated,
        format!("min gap {worst_gap:e}"),
    ));

    let extra = [
        DecaySchedule::new(0.9, DecayFamily::Constant { beta2: 0.999 }).expect("valid"),
    ];
    for s in families.iter().chain(&extra) {
        let bad = ts.iter().find(|&&t| {
            let v = s.beta2_hat(t);
            let c = s.beta2_hat_complement(t);
            !(0.0..=1.0).contains(&v) || !(0.0..=1.0).contains(&c) || (v + c - 1.0).abs() > 1e-15
        });
        checks.push(Check::new(
            format!("{}: beta2_hat in [0, 1], complement consistent", s.family().name()),
            bad.is_none(),
            bad.map(|t| format!("fails at t = {t}")).unwrap_or_default(),
        ));
    }
    checks
}

/// Acceptance-style Monte-Carlo checks with a zero-mean, unit-variance gradient.
pub fn variance_checks(chains: usize, t: u64) -> Result<Vec<Check>, NoiseError> {
    let beta2 = 0.999;
    let model = NoiseModel::constant(1, 0.0, 1.0)?;
    let classic = ChainMode::BiasCorrected { beta2 };
    let mut checks = Vec::new();

    let s = mc_moments(&model, &classic, t, chains, 1)?;
    let want_mean = closed_form_exp(beta2, 1.0, 0.0, t)?;
    let rel = (s.mean_avg() - want_mean).abs() / want_mean;
    checks.push(Check::new(
        format!("E[v_hat] at t={t} within 1% of sigma^2"),
        rel <= 0.01,
        format!("{:.6} (rel {rel:.2e})", s.mean_avg()),
    ));
    let limit = closed_form_var(beta2, 1.0, 0.0, Horizon::Infinite)?;
    let rel = (s.var_avg() - limit).abs() / limit;
    checks.push(Check::new(
        format!("Var[v_hat] at t={t} within 5% of 2(1-b)/(1+b)"),
        rel <= 0.05,
        format!("{:.6e} vs {limit:.6e} (rel {rel:.2e})", s.var_avg()),
    ));
    for probe in [1, 100] {
        let s = mc_moments(&model, &classic, probe, chains, 2)?;
        let want = closed_form_var(beta2, 1.0, 0.0, Horizon::Step(probe))?;
        let rel = (s.var_avg() - want).abs() / want;
        checks.push(Check::new(
            format!("finite-t Var closed form at t={probe}"),
            rel <= 0.05,
            format!("MC {:.6e} vs {want:.6e} (rel {rel:.2e})", s.var_avg()),
        ));
    }

    let modes = [ChainMode::Schedule(DecaySchedule::adamnx()), classic];
    let per_seed = (chains / 10).max(2);
    let mut agree = 0;
    let mut detail = Vec::new();
    for seed in 1..=5 {
        let st = mc_moments_paired(&model, &modes, t, per_seed, 1000 + seed)?;
        if st[0].var_avg() < st[1].var_avg() {
            agree += 1;
        }
        detail.push(format!("{:.3e}<{:.3e}", st[0].var_avg(), st[1].var_avg()));
    }
    checks.push(Check::new(
        format!("Var ordering adamnx < adam(0.999) at t={t}, 5 seeds"),
        agree == 5,
        detail.join(" "),
    ));
    Ok(checks)
}

fn random_point(shapes: &[Tensor], rng: &mut Rng, scale: f64) -> Vec<Tensor> {
    shapes
        .iter()
        .map(|p| {
            let mut q = p.zeros_like();
            for x in q.data_mut() {
                *x = scale * rng.standard_normal();
            }
            q
        })
        .collect()
}

/// Worst relative error of the analytic gradient against central
/// differences over `points` random points.
pub fn gradient_error(problem: &dyn Problem, points: usize, scale: f64, rng: &mut Rng) -> f64 {
    let template = problem.init_params(rng);
    let batch = match problem.dataset() {
        Some(ds) => Batch::Indices((0..ds.len().min(64)).collect()),
        None => Batch::Full,
    };
    (0..points)
        .map(|_| {
            let x = random_point(&template, rng, scale);
            let (_, g) = problem.loss_and_grad(&x, &batch);
            let fd = fd_gradient(problem, &x, &batch, DEFAULT_FD_STEP);
            relative_error(&g, &fd)
        })
        .fold(0.0, f64::max)
}

/// The four gradient-check problems, with the point scale used for each.
pub fn gradcheck_problems() -> Vec<(Box<dyn Problem>, f64)> {
    let data = Arc::new(make_blobs(64, 4, 5, 1.0, &mut Rng::new(11)).expect("valid blob parameters"));
    vec![
        (Box::new(Quadratic::new(10, 10.0)), 1.0),
        (Box::new(Rosenbrock::new(6)), 1.0),
        (Box::new(LogReg::new(data.clone(), 1e-2)), 0.5),
        (Box::new(Mlp::new(data, &[8, 6])), 0.5),
    ]
}

pub fn gradient_checks() -> Vec<Check> {
    let mut rng = Rng::new(7);
    gradcheck_problems()
        .into_iter()
        .map(|(p, scale)| {
            let err = gradient_error(p.as_ref(), 10, scale, &mut rng);
            Check::new(
                format!("{}: analytic vs central difference", p.name()),
                err <= 1e-6,
                format!("max rel err {err:.2e} over 10 points"),
            )
        })
        .collect()
}

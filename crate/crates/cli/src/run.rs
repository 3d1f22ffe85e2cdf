//! Command dispatch. Parallel work is organized as ordered maps over
//! fixed index ranges (replicate blocks, chain ids, angle indices), so the
//! emitted bytes are independent of the worker-pool size.

use rayon::prelude::*;

use favard_core::asymptotics::{self, VMethod};
use favard_core::diagnostics::{self, BandSpec, Sampler};
use favard_core::favard::{self, FavardEstimate, McConfig};
use favard_core::geometry::{Angle, Line, Square};
use favard_core::models::{Levels, Model};
use favard_core::quad::{jittered_midpoints, midpoints};
use favard_core::survival;
use favard_core::{Key, QuadratureRule};

use crate::config::{CommandKind, Experiment};
use crate::emit::{self, f};
use crate::CliError;

pub fn run(exp: &Experiment) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.threads)
        .build()
        .map_err(|e| CliError::io(format!("worker pool: {e}")))?;
    pool.install(|| dispatch(exp))
}

fn dispatch(exp: &Experiment) -> Result<(), CliError> {
    match exp.command {
        CommandKind::Sample => cmd_sample(exp),
        CommandKind::Favard => cmd_favard(exp),
        CommandKind::Expected => cmd_expected(exp),
        CommandKind::ExactExpected => cmd_exact_expected(exp),
        CommandKind::Survival => cmd_survival(exp),
        CommandKind::Vtheta => cmd_vtheta(exp),
        CommandKind::Limit => cmd_limit(exp),
        CommandKind::Ratio => cmd_ratio(exp),
        CommandKind::DegScan => cmd_deg_scan(exp),
        CommandKind::Bv => cmd_bv(exp),
        CommandKind::Bounds => cmd_bounds(exp),
    }
}

fn model<'a>(exp: &'a Experiment) -> &'a Model {
    exp.model.as_ref().expect("validated command has a model")
}

/// Parallel Monte-Carlo sweep: blocks in parallel, merged in block order.
pub fn mc_sweep_parallel(
    m: &Model,
    cfg: &McConfig,
    stream: Key,
) -> Result<Vec<FavardEstimate>, CliError> {
    let blocks: Result<Vec<_>, favard_core::Error> = (0..favard::mc_block_count(cfg))
        .into_par_iter()
        .map(|b| favard::mc_block(m, cfg, stream, b))
        .collect();
    Ok(favard::mc_merge(cfg, &blocks?))
}

fn cmd_sample(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let real = favard_core::models::sample_chain(m, exp.n_hi, exp.stream())?;
    let mut levels_json = String::from("[");
    match real.levels() {
        Levels::Grid(levels) => {
            for (k, lvl) in levels.iter().enumerate() {
                if k > 0 {
                    levels_json.push(',');
                }
                levels_json.push('[');
                for (i, code) in lvl.iter().enumerate() {
                    if i > 0 {
                        levels_json.push(',');
                    }
                    levels_json.push_str(&code.to_string());
                }
                levels_json.push(']');
            }
        }
        Levels::Disc(levels) => {
            for (k, lvl) in levels.iter().enumerate() {
                if k > 0 {
                    levels_json.push(',');
                }
                levels_json.push('[');
                for (i, (x, y)) in lvl.iter().enumerate() {
                    if i > 0 {
                        levels_json.push(',');
                    }
                    levels_json.push_str(&format!("[{},{}]", f(*x), f(*y)));
                }
                levels_json.push(']');
            }
        }
    }
    levels_json.push(']');
    let z: Vec<String> = real.z_trace().iter().map(|&z| f(z)).collect();
    let body = format!(
        "{{\"model_id\":\"{}\",\"L\":{},\"n\":{},\"seed\":{},\"code_version\":\"{}\",\"kind\":\"{}\",\"z\":[{}],\"levels\":{}}}",
        exp.model_id,
        m.l(),
        exp.n_hi,
        exp.seed,
        crate::config::CODE_VERSION,
        if real.is_grid() { "grid" } else { "disc" },
        z.join(","),
        levels_json
    );
    emit::json(exp.out.as_deref(), &body)
}

fn cmd_favard(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let rule = QuadratureRule::new(exp.theta_nodes);
    let stream = exp.stream();
    let rows: Result<Vec<String>, favard_core::Error> = (0..exp.replicates)
        .into_par_iter()
        .map(|chain| {
            let real = favard_core::models::sample_chain(m, exp.n_hi, stream.child(chain as u64))?;
            let v = favard_core::favard::favard_length(&real, rule, exp.fatten);
            let z = *real.z_trace().last().unwrap();
            Ok(format!(
                "{},{},{},{},{},{},{},{},{}",
                exp.model_id,
                m.l(),
                chain,
                exp.n_hi,
                rule.angle_nodes(),
                f(exp.fatten),
                f(v.value),
                f(z),
                exp.seed
            ))
        })
        .collect();
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "model_id,L,chain_id,n,theta_nodes,fatten,fav,z_n,seed",
        rows?,
    )
}

fn cmd_expected(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let cfg = McConfig {
        depths: (exp.n_lo..=exp.n_hi).collect(),
        replicates: exp.replicates,
        theta_rule: QuadratureRule::new(exp.theta_nodes),
        fatten: exp.fatten,
        condition_on_survival: exp.condition_on_survival,
    };
    let estimates = mc_sweep_parallel(m, &cfg, exp.stream())?;
    let rows = estimates.iter().map(|e| {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            exp.model_id,
            m.l(),
            e.n,
            e.replicates,
            e.theta_nodes,
            f(e.mean),
            f(e.stderr),
            f(e.mean_z),
            exp.seed
        )
    });
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "model_id,L,n,replicates,theta_nodes,mean_fav,stderr,mean_z,seed",
        rows.collect::<Vec<_>>(),
    )
}

fn cmd_exact_expected(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let theta_rule = QuadratureRule::new(exp.theta_nodes);
    let t_rule = QuadratureRule::new(exp.t_nodes);
    let rows: Result<Vec<String>, favard_core::Error> = (exp.n_lo..=exp.n_hi)
        .into_par_iter()
        .map(|n| {
            let v = survival::expected_favard_exact(m, n, theta_rule, t_rule)?;
            Ok(format!(
                "{},{},{},{},{},{},{}",
                exp.model_id,
                m.l(),
                n,
                theta_rule.angle_nodes(),
                t_rule.offset_nodes(),
                f(v.value),
                f(v.refine_error)
            ))
        })
        .collect();
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "model_id,L,n,theta_nodes,t_nodes,value,refine_error",
        rows?,
    )
}

fn cmd_survival(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let mt = QuadratureRule::new(exp.theta_nodes).angle_nodes();
    let thetas: Vec<f64> = midpoints(0.0, std::f64::consts::PI, mt).collect();
    let n = exp.n_hi;
    let t_nodes = QuadratureRule::new(exp.t_nodes).offset_nodes();
    let rows: Result<Vec<Vec<String>>, favard_core::Error> = thetas
        .into_par_iter()
        .map(|theta| {
            let angle = Angle::new(theta);
            let (lo, hi) =
                favard_core::geometry::square_projection_span(angle, &Square::unit());
            let mut out = Vec::with_capacity(t_nodes as usize);
            for t in jittered_midpoints(lo, hi, t_nodes) {
                let s = survival::survival_probability(m, &Line::new(angle, t), n)?;
                out.push(format!("{},{},{},{}", f(theta), f(t), n, f(s.survival)));
            }
            Ok(out)
        })
        .collect();
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "theta,t,n,p",
        rows?.into_iter().flatten(),
    )
}

fn cmd_vtheta(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let mt = QuadratureRule::new(exp.theta_nodes).angle_nodes();
    let thetas: Vec<f64> = midpoints(0.0, std::f64::consts::PI, mt).collect();
    let rows: Result<Vec<String>, favard_core::Error> = thetas
        .into_par_iter()
        .map(|theta| {
            let a = Angle::new(theta);
            let vd = asymptotics::v_theta(m, a, VMethod::Definition)?;
            let va = asymptotics::v_theta(m, a, VMethod::Alternative)?;
            Ok(format!(
                "{},{},{},{},{}",
                exp.model_id,
                f(theta),
                f(vd),
                f(va),
                f((vd - va).abs())
            ))
        })
        .collect();
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "model_id,theta,v_def,v_alt,abs_diff",
        rows?,
    )
}

fn cmd_limit(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let v = asymptotics::limit_constant(m, QuadratureRule::new(exp.theta_nodes))?;
    let mut cfg = serde_json::to_value(&exp.resolved).unwrap();
    if let Some(map) = cfg.as_object_mut() {
        map.insert(
            "code_version".into(),
            serde_json::Value::String(crate::config::CODE_VERSION.into()),
        );
        map.insert(
            "model_id".into(),
            serde_json::Value::String(exp.model_id.clone()),
        );
        map.retain(|_, v| !v.is_null());
    }
    let body = format!(
        "{{\"constant\":{},\"refinement_error\":{},\"config\":{}}}",
        f(v.value),
        f(v.refine_error),
        cfg
    );
    emit::json(exp.out.as_deref(), &body)
}

fn cmd_ratio(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let rule = QuadratureRule::new(exp.theta_nodes);
    let stream = exp.stream();
    let cfg = McConfig {
        depths: (1..=exp.n_hi).collect(),
        replicates: exp.ref_replicates,
        theta_rule: rule,
        fatten: 0.0,
        condition_on_survival: false,
    };
    let refs = mc_sweep_parallel(m, &cfg, stream.child(0))?;
    let chain_stream = stream.child(1);
    let rows: Result<Vec<Vec<String>>, favard_core::Error> = (0..exp.chains)
        .into_par_iter()
        .map(|chain| {
            let tr = favard::ratio_trace(m, exp.n_hi, &refs, rule, chain_stream.child(chain as u64))?;
            Ok(tr
                .rows
                .iter()
                .map(|r| {
                    format!("{},{},{},{},{}", chain, r.n, f(r.fav), f(r.z), f(r.ratio))
                })
                .collect())
        })
        .collect();
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "chain_id,n,fav,z_n,ratio",
        rows?.into_iter().flatten(),
    )
}

fn cmd_deg_scan(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let rows = asymptotics::degenerate_band_scan(
        m,
        exp.n_hi,
        exp.k_max,
        QuadratureRule::new(exp.t_nodes),
        exp.angles_per_band,
    )?;
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "k,theta,n,e_proj,ratio_n_over_Lk",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.k,
                f(r.theta),
                exp.n_hi,
                f(r.e_proj),
                f(r.ratio)
            )
        }),
    )
}

fn cmd_bv(exp: &Experiment) -> Result<(), CliError> {
    let m = model(exp);
    let real = favard_core::models::sample_chain(m, exp.n_hi, exp.stream())?;
    let rule = QuadratureRule::new(exp.t_nodes);
    let mut rows = Vec::new();
    let lf = m.l() as f64;
    for k in 1..=exp.k_max {
        let lk = lf.powi(k as i32);
        if lk > exp.n_hi as f64 {
            continue;
        }
        let v = diagnostics::band_l2(&real, BandSpec { k }, rule)?;
        let scaled = v * lk * lk / exp.n_hi as f64;
        rows.push(format!("{},{},{},{}", exp.n_hi, k, f(v), f(scaled)));
    }
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "n,k,band_l2,scaled",
        rows,
    )
}

fn cmd_bounds(exp: &Experiment) -> Result<(), CliError> {
    let battery = diagnostics::standard_battery();
    let stream = exp.stream();
    let trials = exp.trials;
    let rows: Result<Vec<String>, favard_core::Error> = battery
        .into_par_iter()
        .enumerate()
        .map(|(idx, case)| {
            let rep = diagnostics::validate_empirically(case, trials, stream.child(idx as u64))?;
            let (sampler, n, p, l, k, len) = match case.sampler {
                Sampler::BernoulliSum { n, p } => {
                    ("bernoulli_sum", n.to_string(), f(p), String::new(), String::new(), String::new())
                }
                Sampler::WPatternCount { l, k, len } => (
                    "w_pattern_count",
                    String::new(),
                    String::new(),
                    l.to_string(),
                    k.to_string(),
                    len.to_string(),
                ),
            };
            Ok(format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                case.kind.name(),
                sampler,
                n,
                p,
                l,
                k,
                len,
                f(case.epsilon),
                f(rep.bound),
                rep.trials,
                rep.deviations,
                f(rep.frequency),
                rep.pass
            ))
        })
        .collect();
    emit::csv(
        exp.out.as_deref(),
        &exp.config_comment(),
        "kind,sampler,n,p,l,k,len,epsilon,bound,trials,deviations,frequency,pass",
        rows?,
    )
}

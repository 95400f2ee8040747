use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};

use netext::extension::{
    builtin_extension, cross_check_claims, describe, load_plugin_extension, Claims,
    ExtensionCandidate, PluginSpec, BUILTIN_EXTENSIONS,
};
use netext::mazur::{run_bound_suite, write_suite_csv};
use netext::modulus::{
    default_scales, estimate_component_gamma, estimate_gamma as gamma_over_product,
    estimate_modulus as modulus_table, ModulusConfig, ModulusDomain,
};
use netext::net::{
    build_greedy_net, sample_in_ball, verify_net_covering, CandidateLattice, NetConfig, NetHandle,
    ProductNet,
};
use netext::report::to_sorted_json_pretty;
use netext::seed;
use netext::symmetrize::{
    symmetrize as symmetrize_at, verify_equivariance, SymmetrizeConfig, SymmetrizeMode,
};
use netext::verifier::{
    contradiction_pipeline, contradiction_t_max, write_reports_csv, EstimationConfig,
    InequalityReport, PipelineConfig, DEFAULT_SLACK,
};
use netext::{ProductShape, RealVector};

use crate::settings::{CliError, CliResult, Settings, EXIT_FAILURE};
use crate::{
    BuildNetArgs, Common, EstimateGammaArgs, EstimateModulusArgs, ExtensionArgs, ReportArgs,
    RunContradictionArgs, SymmetrizeArgs, VerifyMazurArgs,
};

fn settings(common: &Common) -> CliResult<Settings> {
    Settings::load(common.config.as_deref())
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

fn json_text<T: Serialize>(value: &T) -> CliResult<String> {
    Ok(to_sorted_json_pretty(value)? + "\n")
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn status(ok: bool) -> u8 {
    if ok {
        0
    } else {
        EXIT_FAILURE
    }
}

fn parse_mode(s: &str) -> CliResult<SymmetrizeMode> {
    match s {
        "exact" => Ok(SymmetrizeMode::Exact),
        "sampled" => Ok(SymmetrizeMode::Sampled),
        other => Err(CliError::config(format!(
            "--mode must be exact or sampled, got `{other}`"
        ))),
    }
}

fn parse_claims(s: &str) -> CliResult<Claims> {
    let mut claims = Claims::default();
    for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "extends-f" => claims.extends_f = true,
            "uniformly-continuous" => claims.uniformly_continuous = true,
            "none" => {}
            other => return Err(CliError::config(format!("unknown claim `{other}`"))),
        }
    }
    Ok(claims)
}

fn positive_dim(dim: usize, flag: &str) -> CliResult<usize> {
    if dim == 0 {
        return Err(CliError::config(format!("--{flag} must be >= 1")));
    }
    Ok(dim)
}

/// Resolved `--extension` and friends; the candidate is built later so the
/// net it may need is only constructed on demand.
struct ExtensionChoice {
    name: String,
    plugin_args: Vec<String>,
    timeout: f64,
    claims: Option<Claims>,
}

impl ExtensionChoice {
    fn resolve(s: &Settings, ext: &ExtensionArgs) -> CliResult<Self> {
        let name = s.or(ext.extension.clone(), "extension", "natural".to_string())?;
        let flag_args = (!ext.plugin_arg.is_empty()).then(|| ext.plugin_arg.clone());
        let plugin_args = s.or(flag_args, "plugin-arg", Vec::new())?;
        let timeout = s.or(ext.plugin_timeout, "plugin-timeout", 10.0)?;
        if !(timeout.is_finite() && timeout > 0.0) {
            return Err(CliError::config("--plugin-timeout must be positive"));
        }
        let claims = s
            .opt(ext.claims.clone(), "claims")?
            .map(|c| parse_claims(&c))
            .transpose()?;
        if !BUILTIN_EXTENSIONS.contains(&name.as_str()) && !Path::new(&name).is_file() {
            return Err(CliError::config(format!(
                "--extension `{name}` is neither a built-in ({}) nor an existing plugin file",
                BUILTIN_EXTENSIONS.join(", ")
            )));
        }
        Ok(ExtensionChoice {
            name,
            plugin_args,
            timeout,
            claims,
        })
    }

    fn needs_net(&self) -> bool {
        self.name == "nearest"
    }

    fn build(&self, net: Option<Arc<NetHandle>>) -> CliResult<ExtensionCandidate> {
        let candidate = if BUILTIN_EXTENSIONS.contains(&self.name.as_str()) {
            builtin_extension(&self.name, net)?
        } else {
            let mut spec = PluginSpec::new(PathBuf::from(&self.name))
                .timeout(Duration::from_secs_f64(self.timeout));
            spec.args = self.plugin_args.clone();
            load_plugin_extension(&spec)?
        };
        Ok(match self.claims {
            Some(c) => candidate.with_claims(c),
            None => candidate,
        })
    }

    fn config(&self) -> Value {
        json!({
            "extension": self.name,
            "plugin-arg": self.plugin_args,
            "plugin-timeout": self.timeout,
            "claims": self.claims,
        })
    }
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

fn net(dim: usize, radius: f64, seed: u64) -> CliResult<Arc<NetHandle>> {
    Ok(Arc::new(build_greedy_net(&NetConfig::new(
        dim, radius, seed,
    ))?))
}

pub fn verify_mazur(a: VerifyMazurArgs) -> CliResult<u8> {
    let s = settings(&a.common)?;
    let trials = s.or(a.trials, "trials", 100_000u64)?;
    let p_max = s.or(a.p_max, "p-max", 64u32)?;
    let dim_max = s.or(a.dim_max, "dim-max", 64usize)?;
    let seed = s.or(a.common.seed, "seed", 0u64)?;
    let out = s.opt(a.out, "out")?;
    s.finish()?;
    if p_max < 2 {
        return Err(CliError::config(format!(
            "--p-max must be >= 2, got {p_max}"
        )));
    }
    positive_dim(dim_max, "dim-max")?;
    if trials == 0 {
        eprintln!("netext: warning: --trials 0 gives a vacuous pass");
    }
    let rows = run_bound_suite(trials, p_max, dim_max, seed)?;
    let mut csv = Vec::new();
    write_suite_csv(&rows, &mut csv)?;
    let violations: u64 = rows.iter().map(|r| r.violations).sum();
    match out {
        Some(dir) => {
            prepare_dir(&dir)?;
            write_file(&dir.join("mazur_bounds.csv"), &csv)?;
            println!(
                "verify-mazur: {} trials per bound, {violations} violations",
                trials
            );
        }
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(status(violations == 0))
}

#[derive(Serialize)]
struct NetCheck {
    points: u64,
    separation: Option<f64>,
    covering_radius: f64,
    covering_bound: f64,
    queries: usize,
    maximal: bool,
    passed: bool,
}

pub fn build_net(a: BuildNetArgs) -> CliResult<u8> {
    let s = settings(&a.common)?;
    let dim = s.required(a.dim, "dim")?;
    let radius = s.required(a.radius, "radius")?;
    let out: PathBuf = s.required(a.out, "out")?;
    let seed = s.or(a.common.seed, "seed", 0u64)?;
    let lattice = s.opt(a.lattice, "lattice")?;
    let max_candidates = s.opt(a.max_candidates, "max-candidates")?;
    let queries = s.or(a.queries, "queries", 10_000usize)?;
    s.finish()?;
    let mut cfg = NetConfig::new(positive_dim(dim, "dim")?, radius, seed);
    cfg.lattice = match lattice.as_deref() {
        None => None,
        Some("half") => Some(CandidateLattice::Half),
        Some("integer") => Some(CandidateLattice::Integer),
        Some(other) => {
            return Err(CliError::config(format!(
                "--lattice must be half or integer, got `{other}`"
            )))
        }
    };
    if let Some(m) = max_candidates {
        cfg.max_candidates = m;
    }
    let net = build_greedy_net(&cfg)?;
    let covering = verify_net_covering(&net, queries, seed);
    let bound = 1.0 + net.covering_slack();
    let maximal = net.verify_maximality()?;
    let separation = net.sidecar().separation;
    let passed = separation.is_none_or(|d| d >= 1.0) && covering <= bound && maximal;
    let check = NetCheck {
        points: net.len(),
        separation,
        covering_radius: covering,
        covering_bound: bound,
        queries,
        maximal,
        passed,
    };
    prepare_dir(&out)?;
    net.save(&out.join("net.csv"), &out.join("net.json"))?;
    write_file(&out.join("net_check.json"), json_text(&check)?.as_bytes())?;
    println!(
        "build-net: {} points ({}), separation {}, covering {covering:.6} <= {bound:.6}: {}",
        net.len(),
        net.candidate_stream().tag(),
        separation.map_or("n/a".to_string(), |d| d.to_string()),
        if passed { "ok" } else { "FAILED" }
    );
    Ok(status(passed))
}

pub fn symmetrize(a: SymmetrizeArgs) -> CliResult<u8> {
    let s = settings(&a.common)?;
    let ext = ExtensionChoice::resolve(&s, &a.ext)?;
    let n = positive_dim(s.or(a.n, "n", 4usize)?, "n")?;
    let p = s.or(a.p, "p", 4u32)?;
    let dim = s.or(a.dim, "dim", n)?;
    let mode = parse_mode(&s.or(a.mode, "mode", "exact".to_string())?)?;
    let samples = s.or(a.samples, "samples", 100_000u64)?;
    let point = s.list::<f64>(a.point.as_deref(), "point")?;
    let points = s.or(a.points, "points", 1usize)?;
    let radius = s.or(a.radius, "radius", 2.0f64)?;
    let net_radius = s.or(a.net_radius, "net-radius", 2.0f64)?;
    let trials = s.or(a.equivariance_trials, "equivariance-trials", 0usize)?;
    let seed = s.or(a.common.seed, "seed", 0u64)?;
    let out = s.opt(a.out, "out")?;
    s.finish()?;
    if dim < n {
        return Err(CliError::config(format!("--dim {dim} is below --n {n}")));
    }
    let mut cfg = match mode {
        SymmetrizeMode::Exact => SymmetrizeConfig::exact(n, p),
        SymmetrizeMode::Sampled => SymmetrizeConfig::sampled(
            n,
            p,
            samples,
            seed::derive_seed(seed, "cli-symmetrize", &[]),
        ),
    };
    cfg.ambient_dim = Some(dim);
    let component_net = if ext.needs_net() {
        Some(net(dim, net_radius, seed)?)
    } else {
        None
    };
    let candidate = ext.build(component_net)?;
    let xs: Vec<RealVector> = match point {
        Some(v) => vec![RealVector::new(v)?],
        None => {
            let mut rng = seed::stream(seed, "cli-symmetrize-points", &[]);
            (0..points)
                .map(|_| RealVector::new(sample_in_ball(&mut rng, n, radius)))
                .collect::<netext::Result<_>>()?
        }
    };
    let map = candidate.component(p);
    let results = xs
        .iter()
        .map(|x| {
            let r = symmetrize_at(&map, x, &cfg)?;
            Ok(json!({
                "x": x,
                "value": r.value,
                "std_error": r.std_error,
                "group_elements": r.group_elements,
            }))
        })
        .collect::<CliResult<Vec<Value>>>()?;
    let mut ok = true;
    let equivariance = if trials > 0 {
        let rep = verify_equivariance(&map, &cfg, trials, seed)?;
        if mode == SymmetrizeMode::Exact {
            ok = rep.max_relative <= 1e-9;
        }
        Some(rep)
    } else {
        None
    };
    let config = merge(
        ext.config(),
        json!({
            "n": n, "p": p, "dim": dim, "mode": mode, "samples": samples,
            "radius": radius, "net-radius": net_radius, "equivariance-trials": trials, "seed": seed,
        }),
    );
    let doc = json!({
        "candidate": describe(&candidate),
        "config": config,
        "results": results,
        "equivariance": equivariance,
    });
    let text = json_text(&doc)?;
    match out {
        Some(dir) => {
            prepare_dir(&dir)?;
            write_file(&dir.join("symmetrize.json"), text.as_bytes())?;
            println!("symmetrize: {} evaluation point(s) written", results.len());
        }
        None => print!("{text}"),
    }
    Ok(status(ok))
}

pub fn estimate_modulus(a: EstimateModulusArgs) -> CliResult<u8> {
    let s = settings(&a.common)?;
    let ext = ExtensionChoice::resolve(&s, &a.ext)?;
    let dim = positive_dim(s.or(a.dim, "dim", 4usize)?, "dim")?;
    let p0 = s.or(a.p0, "p0", 2u32)?;
    let p_max = s.or(a.p_max, "p-max", 8u32)?;
    let component = s.opt(a.component, "component")?;
    let scales = s
        .list::<f64>(a.scales.as_deref(), "scales")?
        .unwrap_or_else(default_scales);
    let samples = s.or(a.samples, "samples", 2_000usize)?;
    let net_radius = s.or(a.net_radius, "net-radius", 2.0f64)?;
    let seed = s.or(a.common.seed, "seed", 0u64)?;
    let out = s.opt(a.out, "out")?;
    s.finish()?;
    let shape = ProductShape::new(p0, p_max, dim)?;
    if let Some(p) = component {
        if p < p0 || p > p_max {
            return Err(CliError::config(format!(
                "--component {p} outside {p0}..={p_max}"
            )));
        }
    }
    let component_net = if ext.needs_net() {
        Some(net(dim, net_radius, seed)?)
    } else {
        None
    };
    let candidate = ext.build(component_net)?;
    let cfg = ModulusConfig::new(scales, samples, seed);
    let map;
    let domain = match component {
        Some(p) => {
            map = candidate.component(p);
            ModulusDomain::Vector {
                map: &map,
                dim,
                output_exponent: p as f64,
            }
        }
        None => ModulusDomain::Product {
            map: &candidate,
            shape,
        },
    };
    let table = modulus_table(&domain, &cfg)?;
    let flags = cross_check_claims(&candidate, Some(&table), None);
    for f in &flags {
        eprintln!("netext: claim contradicted: {}", f.message);
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    match out {
        Some(dir) => {
            prepare_dir(&dir)?;
            write_file(&dir.join("modulus.csv"), &csv)?;
            let config = merge(
                ext.config(),
                json!({
                    "dim": dim, "p0": p0, "p-max": p_max, "component": component,
                    "samples": samples, "net-radius": net_radius, "seed": seed,
                }),
            );
            let doc = json!({
                "candidate": describe(&candidate),
                "config": config,
                "table": table,
                "claim_flags": flags,
            });
            write_file(&dir.join("modulus.json"), json_text(&doc)?.as_bytes())?;
            println!(
                "estimate-modulus: {} scales, omega_hat({}) = {}",
                table.scales.len(),
                table.scales[0],
                table.estimates[0]
            );
        }
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(status(flags.is_empty()))
}

pub fn estimate_gamma(a: EstimateGammaArgs) -> CliResult<u8> {
    let s = settings(&a.common)?;
    let ext = ExtensionChoice::resolve(&s, &a.ext)?;
    let dim = positive_dim(s.or(a.dim, "dim", 4usize)?, "dim")?;
    let radius = s.or(a.radius, "radius", 5.0f64)?;
    let p0 = s.or(a.p0, "p0", 2u32)?;
    let p_max = s.or(a.p_max, "p-max", 8u32)?;
    let component = s.opt(a.component, "component")?;
    let samples = s.or(a.samples, "samples", 20_000usize)?;
    let seed = s.or(a.common.seed, "seed", 0u64)?;
    let out = s.opt(a.out, "out")?;
    s.finish()?;
    ProductShape::new(p0, p_max, dim)?;
    let component_net = net(dim, radius, seed)?;
    let candidate = ext.build(Some(component_net.clone()))?;
    let gamma = match component {
        Some(p) if p < p0 || p > p_max => {
            return Err(CliError::config(format!(
                "--component {p} outside {p0}..={p_max}"
            )))
        }
        Some(p) => {
            estimate_component_gamma(&candidate.component(p), p, &component_net, samples, seed)?
        }
        None => {
            let pnet = ProductNet::new(component_net.clone(), p0, p_max)?;
            gamma_over_product(&candidate, &pnet, samples, seed)?
        }
    };
    let flags = cross_check_claims(&candidate, None, Some(&gamma));
    for f in &flags {
        eprintln!("netext: claim contradicted: {}", f.message);
    }
    let config = merge(
        ext.config(),
        json!({
            "dim": dim, "radius": radius, "p0": p0, "p-max": p_max, "component": component,
            "samples": samples, "seed": seed,
        }),
    );
    let doc = json!({
        "candidate": describe(&candidate),
        "config": config,
        "gamma": gamma,
        "net": component_net.sidecar(),
        "claim_flags": flags,
    });
    let text = json_text(&doc)?;
    match out {
        Some(dir) => {
            prepare_dir(&dir)?;
            write_file(&dir.join("gamma.json"), text.as_bytes())?;
            println!(
                "estimate-gamma: gamma = {} over {} net points",
                gamma.value, gamma.samples
            );
        }
        None => print!("{text}"),
    }
    Ok(status(flags.is_empty()))
}

pub fn run_contradiction(a: RunContradictionArgs) -> CliResult<u8> {
    let s = settings(&a.common)?;
    let ext = ExtensionChoice::resolve(&s, &a.ext)?;
    let t_grid = s
        .list::<f64>(a.t_grid.as_deref(), "t-grid")?
        .unwrap_or_else(|| vec![0.05]);
    let n = s.or(a.n, "n", 6usize)?;
    let dim = s.or(a.dim, "dim", n)?;
    let net_radius = s.or(a.net_radius, "net-radius", 2.0f64)?;
    let p0 = s.or(a.p0, "p0", 2u32)?;
    let p_max = s.or(a.p_max, "p-max", 24u32)?;
    let mode = parse_mode(&s.or(a.mode, "mode", "exact".to_string())?)?;
    let samples = s.or(a.samples, "samples", 100_000u64)?;
    let modulus_samples = s.or(a.modulus_samples, "modulus-samples", 2_000usize)?;
    let gamma_samples = s.or(a.gamma_samples, "gamma-samples", 20_000usize)?;
    let transfer_samples = s.or(a.transfer_samples, "transfer-samples", 2_000usize)?;
    let slack = s.or(a.slack, "slack", DEFAULT_SLACK)?;
    let seed = s.or(a.common.seed, "seed", 0u64)?;
    let out = s.opt(a.out, "out")?;
    s.finish()?;

    if t_grid.is_empty() {
        return Err(CliError::config("--t-grid is empty"));
    }
    let t_max = contradiction_t_max();
    if let Some(bad) = t_grid.iter().find(|&&t| !(t > 0.0 && t < t_max)) {
        return Err(CliError::config(format!(
            "t = {bad} violates 0 < t < 1/(sqrt(2) e^2) = {t_max}"
        )));
    }
    if dim < n {
        return Err(CliError::config(format!("--dim {dim} is below --n {n}")));
    }
    ProductShape::new(p0, p_max, positive_dim(dim, "dim")?)?;
    let cfg = PipelineConfig {
        n,
        p0,
        p_max,
        mode,
        sample_count: samples,
        transfer_samples,
        estimation: EstimationConfig {
            modulus_samples,
            gamma_samples,
            slack,
            seed,
        },
        ..PipelineConfig::default()
    };
    let component_net = net(dim, net_radius, seed)?;
    let candidate = ext.build(Some(component_net.clone()))?;
    let runs = t_grid
        .iter()
        .map(|&t| contradiction_pipeline(&candidate, &component_net, t, &cfg))
        .collect::<netext::Result<Vec<_>>>()?;
    let consistent = runs.iter().all(|r| r.consistent);
    let config = merge(
        ext.config(),
        json!({
            "t-grid": t_grid, "n": n, "dim": dim, "net-radius": net_radius, "p0": p0, "p-max": p_max,
            "mode": mode, "samples": samples, "modulus-samples": modulus_samples,
            "gamma-samples": gamma_samples, "transfer-samples": transfer_samples, "slack": slack, "seed": seed,
        }),
    );
    let doc = json!({
        "candidate": describe(&candidate),
        "config": config,
        "runs": runs,
        "consistent": consistent,
    });
    let text = json_text(&doc)?;
    let checks: Vec<InequalityReport> =
        runs.iter().flat_map(|r| r.checks.iter().cloned()).collect();
    match out {
        Some(dir) => {
            prepare_dir(&dir)?;
            write_file(&dir.join("contradiction.json"), text.as_bytes())?;
            let mut csv = Vec::new();
            write_reports_csv(&checks, &mut csv)?;
            write_file(&dir.join("contradiction.csv"), &csv)?;
            for r in &runs {
                println!(
                    "t={} p={} omega_hat(sqrt2 t)={} gamma_p={} gamma={} floor={} k_log10={} consistent={}",
                    r.t,
                    r.p,
                    r.omega_sqrt2t,
                    r.gamma.value,
                    r.gamma_product.value,
                    r.analytic.implied_floor,
                    r.analytic.k_log10.map_or("undefined".to_string(), |k| format!("{k:.3}")),
                    r.consistent
                );
            }
        }
        None => print!("{text}"),
    }
    Ok(status(consistent))
}

pub fn report(a: ReportArgs) -> CliResult<u8> {
    let s = settings(&a.common)?;
    let input: PathBuf = s.required(a.input, "input")?;
    let format = s.or(a.format, "format", "summary".to_string())?;
    let _ = s.opt(a.common.seed, "seed")?;
    s.finish()?;
    let text = std::fs::read_to_string(&input)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
    let runs = doc
        .get("runs")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::config(format!("{} has no `runs` array", input.display())))?;
    let mut consistent = true;
    let mut checks = Vec::new();
    let mut lines = Vec::new();
    for run in runs {
        let ok = run
            .get("consistent")
            .and_then(Value::as_bool)
            .unwrap_or(false);
        consistent &= ok;
        let run_checks: Vec<InequalityReport> = serde_json::from_value(
            run.get("checks").cloned().unwrap_or(json!([])),
        )
        .map_err(|e| CliError::config(format!("malformed checks in {}: {e}", input.display())))?;
        let failed = run_checks.iter().filter(|c| !c.holds).count();
        lines.push(format!(
            "t={} p={} checks={} failed={} consistent={}",
            run.get("t").unwrap_or(&Value::Null),
            run.get("p").unwrap_or(&Value::Null),
            run_checks.len(),
            failed,
            ok
        ));
        checks.extend(run_checks);
    }
    match format.as_str() {
        "summary" => {
            for l in &lines {
                println!("{l}");
            }
            println!(
                "overall: {}",
                if consistent {
                    "consistent"
                } else {
                    "INCONSISTENT"
                }
            );
        }
        "csv" => {
            let mut csv = Vec::new();
            write_reports_csv(&checks, &mut csv)?;
            print!("{}", String::from_utf8_lossy(&csv));
        }
        other => {
            return Err(CliError::config(format!(
                "--format must be summary or csv, got `{other}`"
            )))
        }
    }
    Ok(status(consistent))
}

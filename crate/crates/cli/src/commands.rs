use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;
use rayon::prelude::*;
use serde_json::json;

use pvtcell::experiments::{
    channel_table, efficiency_table, figure, linear_to_db, FigureOptions, Network, Scenario,
};
use pvtcell::interference::{limit_form_outage, outage_evaluation, DiskRule, Interferers};
use pvtcell::montecarlo::{
    disk_sinr_samples, grid_sinr_samples, outage_from_samples, pvt_sinr_samples, MCConfig, MCEstimate,
};
use pvtcell::report::{config_hash, fmt, RunManifest, Table};
use pvtcell::validation::{run_suite, Check, Suite};

use crate::args::{Cli, Command, McModel, ScenarioArgs, SuiteArg};

pub enum Status {
    Ok,
    ValidationFailed,
}

pub type Result<T> = std::result::Result<T, String>;

/// Writes to stdout, treating a closed pipe as the reader being done.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("stdout: {e}")),
        _ => Ok(()),
    }
}

enum Output {
    Table(Table),
    Checks(Vec<(Suite, Check)>),
}

pub fn run(argv: &[String]) -> Result<Status> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            emit(&e.to_string())?;
            return Ok(Status::Ok);
        }
        Err(e) => {
            let text = e.render().to_string();
            return Err(text.trim_end().trim_start_matches("error: ").to_string());
        }
    };
    if let Command::Rerun(r) = &cli.command {
        return rerun(&r.manifest);
    }
    if let Some(n) = cli.output.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("cannot start {n} workers: {e}"))?;
    }
    let started = chrono::Utc::now();
    let output = execute(&cli.command)?;
    let (text, status) = match &output {
        Output::Table(t) => (t.to_csv().map_err(|e| e.to_string())?, Status::Ok),
        Output::Checks(checks) => {
            for (_, c) in checks {
                eprintln!("{c}");
            }
            let failed = checks.iter().any(|(_, c)| !c.pass);
            (
                checks_table(checks)?.to_csv().map_err(|e| e.to_string())?,
                if failed { Status::ValidationFailed } else { Status::Ok },
            )
        }
    };
    match &cli.output.out {
        None => emit(&text)?,
        Some(path) => {
            fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display()))?;
            write_manifest(argv, &cli, path, started)?;
        }
    }
    Ok(status)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn seed_of(command: &Command) -> Option<u64> {
    match command {
        Command::Mc(a) => Some(a.seed),
        Command::Validate(a) => Some(a.seed),
        Command::Figure(a) if a.grid => Some(a.seed),
        Command::Blocking(a) | Command::Sojourn(a) if a.network.network != crate::args::NetworkKind::Pvt => {
            Some(a.network.seed)
        }
        Command::Sse(a) | Command::Ee(a) if a.sweep.network.network != crate::args::NetworkKind::Pvt => {
            Some(a.sweep.network.seed)
        }
        _ => None,
    }
}

fn scenario_args(command: &Command) -> Option<&ScenarioArgs> {
    match command {
        Command::Blocking(a) | Command::Sojourn(a) => Some(&a.scenario),
        Command::Sse(a) | Command::Ee(a) => Some(&a.sweep.scenario),
        Command::Outage(a) => Some(&a.scenario),
        Command::Mc(a) => Some(&a.scenario),
        Command::Figure(a) => Some(&a.scenario),
        Command::Validate(_) | Command::Rerun(_) => None,
    }
}

fn write_manifest(argv: &[String], cli: &Cli, out: &Path, started: chrono::DateTime<chrono::Utc>) -> Result<()> {
    let parameters = json!({
        "command": cli.command,
        "output": cli.output,
        "base_scenario": scenario_args(&cli.command).map(|s| s.base()),
    });
    let manifest = RunManifest {
        tool: "pvtcell".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: argv.iter().skip(1).cloned().collect(),
        config_hash: config_hash(&parameters).map_err(|e| e.to_string())?,
        parameters,
        seed: seed_of(&cli.command),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        outputs: vec![out.display().to_string()],
    };
    let path = manifest_path(out);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    fs::write(&path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

fn rerun(manifest: &Path) -> Result<Status> {
    let text = fs::read_to_string(manifest).map_err(|e| format!("{}: {e}", manifest.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", manifest.display()))?;
    if manifest.command.first().map(String::as_str) == Some("rerun") {
        return Err("manifest records another rerun".into());
    }
    let mut argv = vec![manifest.tool.clone()];
    argv.extend(manifest.command);
    run(&argv)
}

/// Scenarios of the sweep, each checked before any work starts.
fn checked_sweep(args: &ScenarioArgs) -> Result<Vec<Scenario>> {
    let sweep = args.sweep();
    for sc in &sweep {
        sc.validate().map_err(|e| e.to_string())?;
    }
    Ok(sweep)
}

fn execute(command: &Command) -> Result<Output> {
    let table = match command {
        Command::Blocking(a) | Command::Sojourn(a) => {
            let net = a.network.network();
            let points: Vec<(Scenario, Network)> =
                checked_sweep(&a.scenario)?.into_iter().map(|sc| (sc, net)).collect();
            channel_table(&a.scenario.base(), &points).map_err(|e| e.to_string())?
        }
        Command::Sse(a) | Command::Ee(a) => {
            let net = a.sweep.network.network();
            let points: Vec<(Scenario, Network)> =
                checked_sweep(&a.sweep.scenario)?.into_iter().map(|sc| (sc, net)).collect();
            efficiency_table(&a.sweep.scenario.base(), a.capacity.rule(), &points).map_err(|e| e.to_string())?
        }
        Command::Outage(a) => outage_table(&a.scenario, &a.delta)?,
        Command::Mc(a) => mc_table(a)?,
        Command::Validate(a) => {
            let suites: Vec<Suite> = if a.suite.is_empty() {
                vec![Suite::Markov, Suite::Outage, Suite::ChainMc, Suite::PvtMc]
            } else {
                a.suite
                    .iter()
                    .map(|s| match s {
                        SuiteArg::Markov => Suite::Markov,
                        SuiteArg::Outage => Suite::Outage,
                        SuiteArg::ChainMc => Suite::ChainMc,
                        SuiteArg::PvtMc => Suite::PvtMc,
                    })
                    .collect()
            };
            if a.trials == 0 {
                return Err("--trials must be at least 1".into());
            }
            let checks = suites
                .into_iter()
                .flat_map(|s| run_suite(s, a.trials, a.seed).into_iter().map(move |c| (s, c)))
                .collect();
            return Ok(Output::Checks(checks));
        }
        Command::Figure(a) => {
            let swept = a.scenario.swept();
            if !swept.is_empty() {
                return Err(format!("figure {} fixes its own sweep; give single values for {}", a.id, swept.join(", ")));
            }
            let base = a.scenario.base();
            base.validate().map_err(|e| e.to_string())?;
            let opts = FigureOptions {
                base,
                rule: a.capacity.rule(),
                grid: a.grid.then_some(Network::GridMc { rings: a.rings, trials: a.trials, seed: a.seed }),
            };
            figure(a.id, &opts).map_err(|e| e.to_string())?
        }
        Command::Rerun(_) => unreachable!("handled before dispatch"),
    };
    Ok(Output::Table(table))
}

fn outage_table(args: &ScenarioArgs, deltas: &[u32]) -> Result<Table> {
    let points: Vec<(Scenario, u32)> =
        checked_sweep(args)?.into_iter().flat_map(|sc| deltas.iter().map(move |&d| (sc, d))).collect();
    let mut table = Table::new([
        "path_loss",
        "bs_density",
        "gamma0_db",
        "delta",
        "outage",
        "raw",
        "abs_error",
        "limit_form",
        "status",
    ]);
    let base = args.base();
    table
        .meta("k_prime_w", fmt(base.link.k_prime))
        .meta("noise_w", fmt(base.link.noise_power))
        .meta("fading", base.model.name())
        .meta("disk", "holds delta base stations on average");
    let results: Vec<_> = points
        .par_iter()
        .map(|(sc, d)| {
            let eval = outage_evaluation(sc.link.gamma0, Interferers::Count(*d), &sc.link, sc.model, &sc.quadrature)?;
            let limit = limit_form_outage(sc.link.gamma0, *d, &sc.link, sc.model, &sc.quadrature)?;
            Ok::<_, pvtcell::interference::InterferenceError>((eval, limit))
        })
        .collect();
    for ((sc, d), res) in points.iter().zip(results) {
        let mut row = vec![
            fmt(sc.link.path_loss_exponent),
            fmt(sc.link.bs_density),
            fmt(linear_to_db(sc.link.gamma0)),
            d.to_string(),
        ];
        match res {
            Ok((e, limit)) => row.extend([fmt(e.probability), fmt(e.raw), fmt(e.abs_error), fmt(limit), "ok".into()]),
            Err(e) => {
                row.extend(std::iter::repeat("NaN".to_string()).take(4));
                row.push(e.to_string());
            }
        }
        table.push(row).map_err(|e| e.to_string())?;
    }
    Ok(table)
}

fn mc_table(a: &crate::args::McArgs) -> Result<Table> {
    if a.trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    let mut table = Table::new([
        "model",
        "path_loss",
        "bs_density",
        "gamma0_db",
        "delta",
        "disk_radius_km",
        "activity",
        "outage",
        "std_error",
        "trials",
        "resampled",
        "seed",
    ]);
    let base = a.scenario.base();
    table
        .meta("k_prime_w", fmt(base.link.k_prime))
        .meta("noise_w", fmt(base.link.noise_power))
        .meta("fading", base.model.name());
    if a.model == McModel::Grid {
        table.meta("rings", a.rings);
    }
    // samples do not depend on the threshold, so each geometry is simulated
    // once and every threshold is read off the same draws
    let geometry = ScenarioArgs { gamma0_db: vec![a.scenario.gamma0_db[0]], ..a.scenario.clone() };
    let model_name = match a.model {
        McModel::Disk => "disk",
        McModel::Pvt => "pvt",
        McModel::Grid => "grid",
    };
    for sc in checked_sweep(&geometry)? {
        let cfg = MCConfig { trials: a.trials, seed: a.seed, activity: a.activity, ..MCConfig::for_density(sc.link.bs_density) };
        let runs: Vec<(Option<u32>, f64, Vec<f64>, u64)> = match a.model {
            McModel::Disk => a
                .delta
                .iter()
                .map(|&d| {
                    let radius = a.disk_radius.unwrap_or_else(|| DiskRule::DensityMatched.radius(d, sc.link.bs_density));
                    let cfg = MCConfig { disk_radius: radius, ..cfg };
                    disk_sinr_samples(d, &sc.link, sc.model, &cfg).map(|s| (Some(d), radius, s, 0))
                })
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| e.to_string())?,
            McModel::Pvt => {
                let (s, redrawn) = pvt_sinr_samples(&sc.link, sc.model, &cfg).map_err(|e| e.to_string())?;
                vec![(None, f64::NAN, s, redrawn)]
            }
            McModel::Grid => {
                let s = grid_sinr_samples(&sc.link, sc.model, &cfg, a.rings).map_err(|e| e.to_string())?;
                vec![(None, f64::NAN, s, 0)]
            }
        };
        for (delta, radius, samples, redrawn) in &runs {
            for &g in &a.scenario.gamma0_db {
                let est: MCEstimate = outage_from_samples(samples, 10f64.powf(g / 10.0));
                table
                    .push(vec![
                        model_name.into(),
                        fmt(sc.link.path_loss_exponent),
                        fmt(sc.link.bs_density),
                        fmt(g),
                        delta.map_or(String::new(), |d| d.to_string()),
                        if radius.is_nan() { String::new() } else { fmt(*radius) },
                        fmt(a.activity),
                        fmt(est.mean),
                        fmt(est.std_error),
                        est.trials.to_string(),
                        redrawn.to_string(),
                        a.seed.to_string(),
                    ])
                    .map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(table)
}

fn checks_table(checks: &[(Suite, Check)]) -> Result<Table> {
    let mut table = Table::new(["suite", "check", "pass", "detail"]);
    for (suite, c) in checks {
        table
            .push(vec![suite.name().to_string(), c.name.clone(), c.pass.to_string(), c.detail.clone()])
            .map_err(|e| e.to_string())?;
    }
    Ok(table)
}

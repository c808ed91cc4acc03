//! Subcommand implementations. Each returns whether every gated check
//! passed (always true outside `verify`).

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use iterlog_core::cmj::{self, Centering, SimConfig, SimOutcome};
use iterlog_core::dist::{LatticeLaw, Law, RngStream};
use iterlog_core::gauss::{self, FkTable};
use iterlog_core::parallel::{map_indexed, thread_count};
use iterlog_core::renewal::{self, fmt17, AsymptoticConstants, PoissonRenewal, RenewalMean, RenewalTable, TableLimits};
use iterlog_core::rrt::{self, GrowthOptions, ProfileTrace};
use iterlog_core::stats::SampleSummary;
use serde::Serialize;

use crate::config::{parse_grid, CenterMode, CommandKind, ExperimentConfig, Format, Grower};
use crate::plot::{emit_plot, PlotSpec, Series, Style};
use crate::verify;

pub fn execute(cfg: &ExperimentConfig) -> anyhow::Result<bool> {
    match cfg.command {
        CommandKind::Moments => moments(cfg).map(|_| true),
        CommandKind::Renewal => renewal_table(cfg).map(|_| true),
        CommandKind::Simulate => simulate(cfg).map(|_| true),
        CommandKind::Mc => mc(cfg).map(|_| true),
        CommandKind::Rrt => rrt_profiles(cfg).map(|_| true),
        CommandKind::Gauss => gaussian(cfg).map(|_| true),
        CommandKind::Verify => run_verify(cfg),
    }
}

fn parse_law(spec: &str) -> anyhow::Result<Law> {
    spec.parse::<Law>().with_context(|| format!("invalid law `{spec}`"))
}

fn lattice_law(spec: &str, what: &str) -> anyhow::Result<LatticeLaw> {
    match parse_law(spec)? {
        Law::Lattice(l) => Ok(l),
        other => bail!("{what} needs a lattice law, got `{other}`"),
    }
}

/// Writes to `--out`, or standard output when absent.
fn write_output(out: Option<&Path>, body: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn plot_to(cfg: &ExperimentConfig, series: &[Series], spec: &PlotSpec) -> anyhow::Result<()> {
    match &cfg.out {
        Some(path) => emit_plot(series, spec, path),
        None => {
            let svg = crate::plot::render_svg(series, spec)?;
            write_output(None, svg.as_bytes())
        }
    }
}

fn unsupported(cfg: &ExperimentConfig, name: &str) -> anyhow::Result<()> {
    bail!("{name} does not support --format {:?}", cfg.format)
}

/// Optional `f64`s render as empty CSV cells.
fn cell(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

#[derive(Serialize)]
struct MomentsReport {
    law: String,
    mu: f64,
    m2: f64,
    var: f64,
    /// `a_k` for `k = 1..=K`; null for degenerate laws.
    a: Vec<Option<f64>>,
    b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lattice: Option<LatticeConstants>,
    constants: Vec<AsymptoticConstants>,
}

#[derive(Serialize)]
struct LatticeConstants {
    d: f64,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "C_corrected")]
    c_corrected: Vec<f64>,
    #[serde(rename = "D")]
    d_limit: f64,
}

fn moments(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let law = parse_law(&cfg.law)?;
    let m = law.moments();
    let eta = cfg.eta.as_deref().map(parse_law).transpose()?;
    let eta_mean = eta.as_ref().map(Law::mean);
    let constants: Vec<AsymptoticConstants> = (1..=cfg.max_level)
        .map(|k| AsymptoticConstants::new(k, &m, eta_mean, law.span()))
        .collect();
    let lattice = law.span().map(|d| LatticeConstants {
        d,
        c: constants.iter().filter_map(|c| c.c_k).collect(),
        c_corrected: constants.iter().filter_map(|c| c.c_k_corrected).collect(),
        d_limit: renewal::lattice_renewal_limit(d, &m),
    });
    let report = MomentsReport {
        law: law.to_string(),
        mu: m.mean,
        m2: m.second_moment,
        var: m.variance,
        a: constants.iter().map(|c| c.a_k).collect(),
        b: renewal::nonlattice_constant(&m),
        eta: eta.map(|e| e.to_string()),
        lattice,
        constants,
    };
    match cfg.format {
        Format::Json => write_output(cfg.out.as_deref(), &json(&report)?),
        _ => unsupported(cfg, "moments"),
    }
}

fn build_table(cfg: &ExperimentConfig, law: &LatticeLaw, horizon: usize, levels: usize) -> anyhow::Result<RenewalTable> {
    let limits = TableLimits::default();
    let base = match &cfg.eta {
        Some(spec) => RenewalTable::perturbed(law, &lattice_law(spec, "--eta with a lattice table")?, horizon, limits)?,
        None => RenewalTable::standard(law, horizon, limits)?,
    };
    Ok(base.convolve_levels(levels, limits)?)
}

fn renewal_table(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let law = lattice_law(&cfg.law, "renewal")?;
    let table = build_table(cfg, &law, cfg.n, cfg.max_level)?;
    match cfg.format {
        Format::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            write_output(cfg.out.as_deref(), &buf)
        }
        Format::Json => write_output(cfg.out.as_deref(), &json(&table)?),
        Format::Svg => {
            let series: Vec<Series> = (1..=table.max_level())
                .map(|k| {
                    let level = table.level(k).expect("level exists");
                    let pts = level.iter().enumerate().map(|(n, &v)| (n as f64 * table.span(), v)).collect();
                    Series::new(format!("V_{k}"), pts, Style::Line)
                })
                .collect();
            let spec = PlotSpec {
                title: format!("Renewal table, {law}", law = Law::from(law)),
                x_label: "t".into(),
                y_label: "V_k(t)".into(),
                reference_lines: Vec::new(),
            };
            plot_to(cfg, &series, &spec)
        }
    }
}

fn sim_config(cfg: &ExperimentConfig, law: Law, grid: Option<Vec<f64>>) -> anyhow::Result<SimConfig> {
    let mut sim = SimConfig::new(law, cfg.max_level, cfg.t)
        .with_seed(cfg.seed)
        .with_replicas(cfg.replicas);
    if let Some(eta) = &cfg.eta {
        sim = sim.with_eta(parse_law(eta)?);
    }
    if let Some(g) = grid {
        sim = sim.with_grid(g);
    }
    sim.validate()?;
    Ok(sim)
}

/// Exact means for table centering: closed form for exponential laws,
/// an exact (possibly perturbed) table for lattice laws.
fn exact_mean(cfg: &ExperimentConfig, law: &Law) -> anyhow::Result<Box<dyn RenewalMean>> {
    if let (Some(rate), None) = (law.exponential_rate(), &cfg.eta) {
        return Ok(Box::new(PoissonRenewal { rate }));
    }
    let Some(lattice) = law.as_lattice() else {
        bail!("--centering table needs an exponential or lattice law");
    };
    let horizon = (cfg.t / lattice.span()).floor() as usize;
    Ok(Box::new(build_table(cfg, lattice, horizon, cfg.max_level)?))
}

fn grid_of(cfg: &ExperimentConfig) -> anyhow::Result<Option<Vec<f64>>> {
    let Some(spec) = &cfg.grid else { return Ok(None) };
    let grid: Vec<f64> = parse_grid(spec)?.into_iter().filter(|&g| g <= cfg.t * (1.0 + 1e-12)).collect();
    if grid.is_empty() {
        bail!("grid `{spec}` has no point within the horizon {}", cfg.t);
    }
    Ok(Some(grid))
}

fn simulate(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let law = parse_law(&cfg.law)?;
    let m = law.moments();
    let grid = grid_of(cfg)?;
    let sim = sim_config(cfg, law.clone(), grid.clone())?;
    let exact = match cfg.centering {
        CenterMode::Table => Some(exact_mean(cfg, &law)?),
        CenterMode::Formula => None,
    };
    let centering = match &exact {
        Some(mean) => Centering::Exact(mean.as_ref()),
        None => Centering::Formula,
    };
    let outcomes: Vec<SimOutcome> = map_indexed(cfg.replicas, thread_count(), |r| cmj::simulate_generations(&sim, r as u64))
        .into_iter()
        .collect::<Result<_, _>>()?;
    match cfg.format {
        Format::Csv => {
            let mut buf = String::from("replica,k,t,Y,clt_stat,lil_stat\n");
            let times = grid.clone().unwrap_or_else(|| vec![cfg.t]);
            for o in &outcomes {
                for k in 1..=cfg.max_level {
                    for (j, &t) in times.iter().enumerate() {
                        let y = match &o.path {
                            Some(path) => path[k - 1][j],
                            None => o.count(k),
                        };
                        let center = centering.center(k, t, &m)?;
                        let clt = cmj::clt_statistic(y as f64, k, t, &m, center).ok();
                        let lil = cmj::lil_statistic(y as f64, k, t, &m, center).ok().map(|s| s.value);
                        buf.push_str(&format!("{},{k},{},{y},{},{}\n", o.replica, fmt17(t), cell(clt), cell(lil)));
                    }
                }
            }
            write_output(cfg.out.as_deref(), buf.as_bytes())
        }
        Format::Json => write_output(cfg.out.as_deref(), &json(&outcomes)?),
        Format::Svg => {
            let Some(grid) = grid else {
                bail!("--format svg for simulate needs --grid");
            };
            let series = outcomes
                .iter()
                .map(|o| {
                    let trace = cmj::lil_running_extrema(o, &grid, cfg.k.min(cfg.max_level), &m, centering)?;
                    Ok(Series::new(
                        format!("replica {}", o.replica),
                        trace.iter().map(|p| (p.t.ln(), p.value)).collect(),
                        Style::Line,
                    ))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let spec = PlotSpec {
                title: format!("LIL statistic, k={}, {law}", cfg.k.min(cfg.max_level)),
                x_label: "log t".into(),
                y_label: "normalized Y_k(t)".into(),
                reference_lines: vec![-1.0, 1.0],
            };
            plot_to(cfg, &series, &spec)
        }
    }
}

#[derive(Serialize)]
struct McReport<'a> {
    law: String,
    max_generation: usize,
    #[serde(flatten)]
    summary: &'a cmj::EnsembleSummary,
}

fn mc(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let law = parse_law(&cfg.law)?;
    let sim = sim_config(cfg, law.clone(), None)?;
    let exact = match cfg.centering {
        CenterMode::Table => Some(exact_mean(cfg, &law)?),
        CenterMode::Formula => None,
    };
    let centering = match &exact {
        Some(mean) => Centering::Exact(mean.as_ref()),
        None => Centering::Formula,
    };
    let summary = cmj::monte_carlo(&sim, centering, thread_count())?;
    match cfg.format {
        Format::Json => {
            let report = McReport {
                law: law.to_string(),
                max_generation: cfg.max_level,
                summary: &summary,
            };
            write_output(cfg.out.as_deref(), &json(&report)?)
        }
        Format::Csv => {
            let mut buf = String::from("k,center,mean_Y,var_Y,clt_mean,clt_var\n");
            for l in &summary.levels {
                buf.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    l.k,
                    fmt17(l.center),
                    fmt17(l.counts.mean),
                    fmt17(l.counts.variance),
                    cell(l.clt.map(|c| c.mean)),
                    cell(l.clt.map(|c| c.variance)),
                ));
            }
            write_output(cfg.out.as_deref(), buf.as_bytes())
        }
        Format::Svg => unsupported(cfg, "mc"),
    }
}

fn grow(cfg: &ExperimentConfig, r: usize) -> ProfileTrace {
    let stream = RngStream::new(cfg.seed, r as u64);
    match cfg.grower {
        Grower::Yule => rrt::grow_yule(cfg.n, cfg.max_level, stream, GrowthOptions::default()),
        Grower::Discrete => rrt::grow_discrete(cfg.n, cfg.max_level, stream, GrowthOptions::default()),
    }
}

#[derive(Serialize)]
struct RrtSummary {
    n: usize,
    #[serde(rename = "K")]
    max_level: usize,
    replicas: usize,
    levels: Vec<RrtLevel>,
}

#[derive(Serialize)]
struct RrtLevel {
    k: usize,
    counts: SampleSummary,
    /// `(log n)^k / k!`.
    leading_term: f64,
}

fn rrt_profiles(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    if cfg.n == 0 {
        bail!("--N must be at least 1");
    }
    if cfg.format == Format::Json && cfg.n <= rrt::MAX_ENUMERATION {
        let pmf = rrt::enumerate_profiles(cfg.n, cfg.max_level)?;
        #[derive(Serialize)]
        struct Dump {
            n: usize,
            #[serde(rename = "K")]
            max_level: usize,
            sequences: u64,
            pmf: std::collections::BTreeMap<String, f64>,
        }
        let dump = Dump {
            n: pmf.n,
            max_level: pmf.max_level,
            sequences: pmf.sequences,
            pmf: pmf.keyed(),
        };
        return write_output(cfg.out.as_deref(), &json(&dump)?);
    }
    let traces = map_indexed(cfg.replicas, thread_count(), |r| grow(cfg, r));
    let ln = (cfg.n as f64).ln();
    let leading = |k: usize| ln.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
    let levels: Vec<RrtLevel> = (1..=cfg.max_level)
        .map(|k| {
            let xs: Vec<f64> = traces.iter().map(|t| t.level_count(k) as f64).collect();
            RrtLevel {
                k,
                counts: SampleSummary::of(&xs),
                leading_term: leading(k),
            }
        })
        .collect();
    match cfg.format {
        Format::Csv => {
            let mut buf = String::from("replica,n,k,X,statistic\n");
            for (r, t) in traces.iter().enumerate() {
                for k in 1..=cfg.max_level {
                    let x = t.level_count(k);
                    let stat = rrt::rrt_lil_statistic(x as f64, cfg.n as u64, k).ok();
                    buf.push_str(&format!("{r},{},{k},{x},{}\n", cfg.n, cell(stat)));
                }
            }
            write_output(cfg.out.as_deref(), buf.as_bytes())
        }
        Format::Json => {
            let summary = RrtSummary {
                n: cfg.n,
                max_level: cfg.max_level,
                replicas: cfg.replicas,
                levels,
            };
            write_output(cfg.out.as_deref(), &json(&summary)?)
        }
        Format::Svg => {
            let mean = levels.iter().map(|l| (l.k as f64, l.counts.mean)).collect();
            let lead = levels.iter().map(|l| (l.k as f64, l.leading_term)).collect();
            let series = [
                Series::new("mean X_n(k)", mean, Style::Markers),
                Series::new("(log n)^k / k!", lead, Style::Line),
            ];
            let spec = PlotSpec {
                title: format!("RRT profile, n={}", cfg.n),
                x_label: "k".into(),
                y_label: "X_n(k)".into(),
                reference_lines: Vec::new(),
            };
            plot_to(cfg, &series, &spec)
        }
    }
}

fn fk_for(cfg: &ExperimentConfig, law: &Law, horizon: f64) -> anyhow::Result<Option<FkTable>> {
    if cfg.k < 2 {
        return Ok(None);
    }
    if let Some(rate) = law.exponential_rate() {
        return Ok(Some(FkTable::poisson(cfg.k, rate, cfg.step, horizon)?));
    }
    let Some(lattice) = law.as_lattice() else {
        bail!("B_2k needs an exponential or lattice law (k >= 2)");
    };
    let n = (horizon / lattice.span()).ceil() as usize;
    let table = RenewalTable::standard(lattice, n, TableLimits::default())?.convolve_levels(cfg.k - 1, TableLimits::default())?;
    Ok(Some(FkTable::from_table(&table, cfg.k, lattice.moments().mean, cfg.step, horizon)?))
}

#[derive(Serialize)]
struct GaussSummary {
    k: usize,
    t: f64,
    step: f64,
    replicas: usize,
    b1k: SampleSummary,
    /// `t^{2k−1}/(2k−1)`.
    b1k_variance_target: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    b2k: Option<SampleSummary>,
    /// `∫_0^t f_k(x)² dx`.
    #[serde(skip_serializing_if = "Option::is_none")]
    b2k_variance_target: Option<f64>,
}

fn gaussian(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let law = parse_law(&cfg.law)?;
    let times = grid_of(cfg)?.unwrap_or_else(|| vec![cfg.t]);
    let horizon = cfg.t;
    let fk = fk_for(cfg, &law, horizon)?;
    let rows: Vec<Vec<(f64, f64, Option<f64>)>> = map_indexed(cfg.replicas, thread_count(), |r| {
        let path = gauss::sample_bm(horizon, cfg.step, RngStream::new(cfg.seed, r as u64))?;
        times
            .iter()
            .map(|&t| {
                let b1 = gauss::b1k(&path, cfg.k, t)?;
                let b2 = fk.as_ref().map(|f| gauss::b2k(&path, f, t)).transpose()?;
                Ok((t, b1, b2))
            })
            .collect::<Result<Vec<_>, iterlog_core::Error>>()
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    match cfg.format {
        Format::Csv => {
            let mut buf = String::from("replica,t,B1k,B2k\n");
            for (r, row) in rows.iter().enumerate() {
                for &(t, b1, b2) in row {
                    buf.push_str(&format!("{r},{},{},{}\n", fmt17(t), fmt17(b1), cell(b2)));
                }
            }
            write_output(cfg.out.as_deref(), buf.as_bytes())
        }
        Format::Json => {
            let summaries = (0..times.len())
                .map(|j| {
                    let t = times[j];
                    let b1: Vec<f64> = rows.iter().map(|row| row[j].1).collect();
                    let b2: Option<Vec<f64>> = rows.iter().map(|row| row[j].2).collect();
                    Ok(GaussSummary {
                        k: cfg.k,
                        t,
                        step: cfg.step,
                        replicas: cfg.replicas,
                        b1k: SampleSummary::of(&b1),
                        b1k_variance_target: t.powi(2 * cfg.k as i32 - 1) / (2 * cfg.k - 1) as f64,
                        b2k: b2.as_deref().map(SampleSummary::of),
                        b2k_variance_target: fk.as_ref().map(|f| gauss::variance_b2k(f, t)).transpose()?,
                    })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            write_output(cfg.out.as_deref(), &json(&summaries)?)
        }
        Format::Svg => unsupported(cfg, "gauss"),
    }
}

fn plot_path(out: &Path, name: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}.{name}.svg"))
}

fn run_verify(cfg: &ExperimentConfig) -> anyhow::Result<bool> {
    let output = verify::run_suite(cfg.suite, cfg.seed, thread_count(), &cfg.checks)?;
    for line in output.report.summary_lines() {
        eprintln!("{line}");
    }
    match cfg.format {
        Format::Json => write_output(cfg.out.as_deref(), output.report.to_json().as_bytes())?,
        _ => bail!("verify writes a JSON report; plots go next to --out"),
    }
    if let Some(out) = &cfg.out {
        for (name, series, spec) in &output.plots {
            emit_plot(series, spec, &plot_path(out, name))?;
        }
    }
    Ok(output.report.passed)
}

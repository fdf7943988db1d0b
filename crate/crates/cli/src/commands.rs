use std::fmt::Write as _;
use std::fs;

use serde::Serialize;

use consensus_lab::benchmark::{regenerate, BenchmarkRow};
use consensus_lab::design::{design_no_dsr, design_robust, search_design, DesignResult, Objective, SearchConfig};
use consensus_lab::graph::{check_rooted, parse_graph, perturbed_example, pin, GraphSpec, PinnedSystem, EXAMPLE_GRAPH_JSON};
use consensus_lab::sim::{consensus_error, simulate_central, simulate_decentralized, Scenario, Trajectory};
use consensus_lab::spectral::{summarize, SpectralSummary};
use consensus_lab::stability::{
    alpha_bar, closed_loop_radius, log_space, mode_roots, perturbation_sweep, Gains, Method, StabilityReport,
};

use crate::output::{sha256_hex, to_json, Artifacts, Cell, Csv};
use crate::{CliError, Common, Format, PerturbArgs};

type CmdResult = Result<u8, CliError>;

struct Network {
    pinned: PinnedSystem,
    graph: Option<GraphSpec>,
    digest: String,
}

impl Network {
    /// 1-based graph label of each matrix row.
    fn labels(&self) -> Vec<usize> {
        self.pinned.node_order().iter().map(|i| i + 1).collect()
    }
}

fn load(c: &Common) -> Result<Network, CliError> {
    if let Some(e) = c.perturbation {
        return Ok(Network {
            pinned: perturbed_example(e)?,
            graph: None,
            digest: sha256_hex(format!("perturbed-example:{e:?}").as_bytes()),
        });
    }
    let text = match &c.graph {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?,
        None => EXAMPLE_GRAPH_JSON.to_string(),
    };
    let graph = parse_graph(&text)?;
    check_rooted(&graph).into_result()?;
    Ok(Network { pinned: pin(&graph), graph: Some(graph), digest: sha256_hex(text.as_bytes()) })
}

fn scenario(c: &Common) -> Result<Scenario, CliError> {
    let sc = Scenario { x_init: c.xi, x_final: c.xf, max_steps: c.steps, band: c.band, d0: c.d0 };
    sc.validate()?;
    Ok(sc)
}

fn objective(c: &Common) -> Result<Objective, CliError> {
    Ok(c.objective.parse::<Objective>()?)
}

/// Designs gains for `--method`.
fn run_design(c: &Common, net: &Network, s: &SpectralSummary) -> Result<DesignResult, CliError> {
    let name = c.method.as_deref().ok_or_else(|| CliError::Usage("--method is required".into()))?;
    let sc = scenario(c)?;
    let obj = objective(c)?;
    let cfg = SearchConfig::default();
    if name == "robust-adsr" {
        return Ok(design_robust(&net.pinned, s, &sc)?);
    }
    let method: Method = name.parse()?;
    if method == Method::NoDsr && obj == Objective::Sigma && s.is_real_spectrum {
        return Ok(design_no_dsr(&net.pinned, s, &sc)?);
    }
    Ok(search_design(&net.pinned, s, method, obj, &cfg, &sc)?)
}

/// Explicit `--alpha-hat/--beta1/--beta2`, or a design for `--method`.
fn resolve_gains(c: &Common, net: &Network, s: &SpectralSummary) -> Result<Gains, CliError> {
    let Some(alpha_hat) = c.alpha_hat else {
        if c.method.is_some() {
            return Ok(run_design(c, net, s)?.gains);
        }
        if c.beta1.is_some() || c.beta2.is_some() {
            return Err(CliError::Usage("--beta1/--beta2 need --alpha-hat".into()));
        }
        return Err(CliError::Usage("give explicit gains with --alpha-hat or pick a --method".into()));
    };
    let method = match c.method.as_deref() {
        None | Some("robust-adsr") => Method::Adsr,
        Some(m) => m.parse()?,
    };
    let beta1 = c.beta1.unwrap_or(0.0);
    let beta2 = match (method, c.beta2) {
        (Method::Nesterov, None) => beta1,
        (_, b) => b.unwrap_or(0.0),
    };
    Ok(Gains::new(method, alpha_hat, beta1, beta2)?)
}

fn parameters(c: &Common) -> serde_json::Value {
    #[derive(Serialize)]
    struct Params<'a> {
        graph: Option<String>,
        perturbation: Option<f64>,
        method: Option<&'a str>,
        objective: &'a str,
        alpha_hat: Option<f64>,
        beta1: Option<f64>,
        beta2: Option<f64>,
        xi: f64,
        xf: f64,
        steps: usize,
        band: f64,
        d0: f64,
        decentralized: bool,
    }
    serde_json::to_value(Params {
        graph: c.graph.as_ref().map(|p| p.display().to_string()),
        perturbation: c.perturbation,
        method: c.method.as_deref(),
        objective: &c.objective,
        alpha_hat: c.alpha_hat,
        beta1: c.beta1,
        beta2: c.beta2,
        xi: c.xi,
        xf: c.xf,
        steps: c.steps,
        band: c.band,
        d0: c.d0,
        decentralized: c.decentralized,
    })
    .expect("parameters serialize")
}

/// Artifact names printed for `--format csv` / `--format json`, and the
/// format used when none is given.
struct Primary<'a> {
    csv: &'a str,
    json: &'a str,
    default: Format,
}

/// Writes artifacts to `--out` (listing the paths) or prints the one
/// matching the requested format.
fn emit(c: &Common, command: &str, digest: &str, artifacts: &Artifacts, primary: Primary) -> Result<(), CliError> {
    if let Some(dir) = &c.out {
        let written = artifacts
            .write_all(dir, command, digest, parameters(c))
            .map_err(|e| CliError::Io(format!("cannot write to {}: {e}", dir.display())))?;
        for p in written {
            println!("{}", p.display());
        }
        return Ok(());
    }
    let name = match c.format.unwrap_or(primary.default) {
        Format::Csv => primary.csv,
        Format::Json => primary.json,
    };
    print!("{}", artifacts.get(name).unwrap_or_default());
    Ok(())
}

pub fn analyze(c: &Common) -> CmdResult {
    let net = load(c)?;
    let s = summarize(&net.pinned)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        agents: usize,
        node_labels: Vec<usize>,
        rooted: bool,
        #[serde(flatten)]
        spectrum: &'a SpectralSummary,
        alpha_bar: f64,
    }
    let summary = Summary {
        agents: net.pinned.dim(),
        node_labels: net.labels(),
        rooted: true,
        spectrum: &s,
        alpha_bar: alpha_bar(&s),
    };
    let mut csv = Csv::new(["index", "re", "im"]);
    for (i, l) in s.eigenvalues.iter().enumerate() {
        csv.row([Cell::from(i + 1), Cell::from(l.re), Cell::from(l.im)]);
    }
    let mut a = Artifacts::default();
    a.add("eigenvalues.csv", csv.into_string());
    a.add("summary.json", to_json(&summary));
    emit(c, "analyze", &net.digest, &a, Primary { csv: "eigenvalues.csv", json: "summary.json", default: Format::Json })?;
    Ok(0)
}

pub fn design(c: &Common) -> CmdResult {
    let net = load(c)?;
    let s = summarize(&net.pinned)?;
    let r = run_design(c, &net, &s)?;
    let mut csv = Csv::new([
        "method",
        "objective",
        "alpha_hat",
        "beta1",
        "beta2",
        "sigma",
        "settling_steps",
        "predicted_settling",
    ]);
    csv.row([
        Cell::from(c.method.clone().unwrap_or_default()),
        Cell::from(r.objective.to_string()),
        Cell::from(r.gains.alpha_hat),
        Cell::from(r.gains.beta1),
        Cell::from(r.gains.beta2),
        Cell::from(r.sigma),
        Cell::from(r.settling_steps),
        r.predicted_settling.map_or(Cell::Empty, Cell::from),
    ]);
    let mut a = Artifacts::default();
    a.add("design.csv", csv.into_string());
    a.add("design.json", to_json(&r));
    emit(c, "design", &net.digest, &a, Primary { csv: "design.csv", json: "design.json", default: Format::Json })?;
    Ok(0)
}

fn trajectory_csv(t: &Trajectory, labels: &[usize]) -> String {
    let header = ["step".to_string(), "X_s".to_string()]
        .into_iter()
        .chain(labels.iter().map(|l| format!("X_{l}")));
    let mut csv = Csv::new(header);
    for (k, (x, s)) in t.states.iter().zip(&t.source).enumerate() {
        csv.row([Cell::from(k), Cell::from(*s)].into_iter().chain(x.iter().map(|&v| Cell::from(v))));
    }
    csv.into_string()
}

pub fn simulate(c: &Common) -> CmdResult {
    let net = load(c)?;
    let s = summarize(&net.pinned)?;
    let sc = scenario(c)?;
    let gains = resolve_gains(c, &net, &s)?;
    let t = if c.decentralized {
        let graph = net
            .graph
            .as_ref()
            .ok_or_else(|| CliError::Usage("--decentralized needs a graph, not a perturbed matrix".into()))?;
        simulate_decentralized(graph, &gains, &sc)?
    } else {
        simulate_central(&net.pinned, &gains, &sc)?
    };
    #[derive(Serialize)]
    struct Summary {
        gains: Gains,
        sigma: f64,
        ts: Option<usize>,
        consensus_error: f64,
        steps: usize,
        decentralized: bool,
    }
    let summary = Summary {
        gains,
        sigma: closed_loop_radius(&gains, &s).spectral_radius,
        ts: t.settled_step,
        consensus_error: consensus_error(&t),
        steps: t.steps(),
        decentralized: c.decentralized,
    };
    let mut a = Artifacts::default();
    a.add("trajectory.csv", trajectory_csv(&t, &net.labels()));
    a.add("summary.json", to_json(&summary));
    emit(c, "simulate", &net.digest, &a, Primary { csv: "trajectory.csv", json: "summary.json", default: Format::Csv })?;
    Ok(0)
}

fn roots_rows(csv: &mut Csv, prefix: &[Cell], report: &StabilityReport, g: &Gains) {
    for m in &report.per_eigenvalue {
        let lambda = consensus_lab::spectral::C64::new(m.lambda[0], m.lambda[1]);
        for z in mode_roots(g, lambda) {
            csv.row(prefix.iter().cloned().chain([
                Cell::from(m.lambda[0]),
                Cell::from(m.lambda[1]),
                Cell::from(z.re),
                Cell::from(z.im),
                Cell::from(z.norm()),
            ]));
        }
    }
}

pub fn roots(c: &Common) -> CmdResult {
    let net = load(c)?;
    let s = summarize(&net.pinned)?;
    let gains = resolve_gains(c, &net, &s)?;
    let report = closed_loop_radius(&gains, &s);
    let mut csv = Csv::new(["lambda_re", "lambda_im", "root_re", "root_im", "magnitude"]);
    roots_rows(&mut csv, &[], &report, &gains);
    let mut a = Artifacts::default();
    a.add("roots.csv", csv.into_string());
    a.add("stability.json", to_json(&report));
    emit(c, "roots", &net.digest, &a, Primary { csv: "roots.csv", json: "stability.json", default: Format::Csv })?;
    Ok(0)
}

pub fn perturb(p: &PerturbArgs) -> CmdResult {
    let c = &p.common;
    if c.graph.is_some() || c.perturbation.is_some() {
        return Err(CliError::Usage("perturb always uses the example network; drop --graph/--perturbation".into()));
    }
    if !(p.e_min > 0.0 && p.e_min <= p.e_max) || p.count == 0 {
        return Err(CliError::Usage("need 0 < e-min <= e-max and count >= 1".into()));
    }
    let base = load(c)?;
    let s0 = summarize(&base.pinned)?;
    let gains = if c.alpha_hat.is_some() || c.method.is_some() {
        resolve_gains(c, &base, &s0)?
    } else {
        design_no_dsr(&base.pinned, &s0, &scenario(c)?)?.gains
    };
    let es = log_space(p.e_min, p.e_max, p.count);
    let sweep = perturbation_sweep(&es, &gains)?;
    let mut csv = Csv::new(["e", "lambda_re", "lambda_im", "root_re", "root_im", "magnitude"]);
    for &e in &es {
        let s = summarize(&perturbed_example(e)?)?;
        roots_rows(&mut csv, &[Cell::from(e)], &closed_loop_radius(&gains, &s), &gains);
    }
    #[derive(Serialize)]
    struct Sweep<'a> {
        gains: Gains,
        points: &'a [consensus_lab::stability::SweepPoint],
        all_stable: bool,
    }
    let all_stable = sweep.iter().all(|pt| pt.stable);
    let mut a = Artifacts::default();
    a.add("roots.csv", csv.into_string());
    a.add("sweep.json", to_json(&Sweep { gains, points: &sweep, all_stable }));
    let digest = sha256_hex(format!("perturbed-example:{:?}:{:?}:{}", p.e_min, p.e_max, p.count).as_bytes());
    emit(c, "perturb", &digest, &a, Primary { csv: "roots.csv", json: "sweep.json", default: Format::Csv })?;
    Ok(if all_stable { 0 } else { 3 })
}

pub fn stability(c: &Common) -> CmdResult {
    let net = load(c)?;
    let s = summarize(&net.pinned)?;
    let gains = resolve_gains(c, &net, &s)?;
    let report = closed_loop_radius(&gains, &s);
    let mut csv = Csv::new(["lambda_re", "lambda_im", "magnitude", "jury_stable", "margins"]);
    for m in &report.per_eigenvalue {
        let margins: Vec<String> = m.jury_margins.iter().map(|&x| crate::output::sig12(x)).collect();
        csv.row([
            Cell::from(m.lambda[0]),
            Cell::from(m.lambda[1]),
            Cell::from(m.magnitude),
            Cell::from(m.jury_stable),
            Cell::from(margins.join(";")),
        ]);
    }
    let mut a = Artifacts::default();
    a.add("stability.csv", csv.into_string());
    a.add("stability.json", to_json(&report));
    emit(c, "stability", &net.digest, &a, Primary { csv: "stability.csv", json: "stability.json", default: Format::Json })?;
    if !report.stable {
        eprintln!("unstable: spectral radius {}", report.spectral_radius);
        return Ok(3);
    }
    Ok(0)
}

fn table_text(rows: &[BenchmarkRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<20} {:>8} {:>8} {:>8} {:>8} {:>8} {:>5} {:>6}  result",
        "configuration", "α̂", "β1", "β2", "σ", "σ ref", "Ts", "Ts ref"
    )
    .unwrap();
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    for r in rows {
        let verdict = if r.pass { "pass" } else { "FAIL" };
        let Some(d) = &r.design else {
            writeln!(out, "{:<20} {}  {verdict}", r.label, r.note.as_deref().unwrap_or("no design")).unwrap();
            continue;
        };
        writeln!(
            out,
            "{:<20} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>5} {:>6}  {verdict}",
            r.label,
            d.gains.alpha_hat,
            d.gains.beta1,
            d.gains.beta2,
            d.sigma,
            opt(r.reference.map(|x| x.sigma)),
            d.settling_steps.map_or("-".into(), |t| t.to_string()),
            r.reference.map_or("-".into(), |x| x.settling_steps.to_string()),
        )
        .unwrap();
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    if rows.iter().any(|r| r.reference.is_some()) {
        writeln!(out, "{passed}/{} rows within tolerance of the reference values", rows.len()).unwrap();
    } else {
        writeln!(out, "{passed}/{} rows stable and settling (no reference values for this network)", rows.len())
            .unwrap();
    }
    out
}

pub fn reproduce_table(c: &Common) -> CmdResult {
    let net = load(c)?;
    let s = summarize(&net.pinned)?;
    let rows = regenerate(&net.pinned, &s, &SearchConfig::default(), &scenario(c)?);
    let mut csv = Csv::new([
        "configuration",
        "alpha_hat",
        "beta1",
        "beta2",
        "sigma",
        "sigma_ref",
        "ts",
        "ts_ref",
        "sigma_ok",
        "ts_ok",
        "pass",
        "note",
    ]);
    for r in &rows {
        let (g, sigma, ts) = match &r.design {
            Some(d) => (
                [Cell::from(d.gains.alpha_hat), Cell::from(d.gains.beta1), Cell::from(d.gains.beta2)],
                Cell::from(d.sigma),
                Cell::from(d.settling_steps),
            ),
            None => ([Cell::Empty, Cell::Empty, Cell::Empty], Cell::Empty, Cell::Empty),
        };
        csv.row(
            [Cell::from(r.label.as_str())]
                .into_iter()
                .chain(g)
                .chain([
                    sigma,
                    r.reference.map_or(Cell::Empty, |x| Cell::from(x.sigma)),
                    ts,
                    r.reference.map_or(Cell::Empty, |x| Cell::from(x.settling_steps)),
                    Cell::from(r.sigma_ok),
                    Cell::from(r.ts_ok),
                    Cell::from(r.pass),
                    Cell::from(r.note.clone().unwrap_or_default()),
                ]),
        );
    }
    let mut a = Artifacts::default();
    a.add("table.csv", csv.into_string());
    a.add("table.json", to_json(&rows));
    a.add("table.txt", table_text(&rows));
    if c.out.is_none() && c.format.is_none() {
        print!("{}", a.get("table.txt").unwrap_or_default());
        return Ok(0);
    }
    emit(c, "reproduce-table1", &net.digest, &a, Primary { csv: "table.csv", json: "table.json", default: Format::Csv })?;
    Ok(0)
}

mod config;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncenter::certify::{check_criterion_exact, check_criterion_numeric, criterion_table, table_row, CheckDetail, DEFAULT_TOL};
use ncenter::model::hamiltonian;
use ncenter::simulate::{integrate_flow, poincare_section, section_initial_conditions, Section, SectionDirection};
use ncenter::{certify, PhaseState, Rational};
use num_complex::Complex64;

use config::{InputError, RunConfig};

#[derive(Parser)]
#[command(name = "ncenter", version, about = "Integrability criteria and simulation for N-center problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a configuration and write a JSON report
    Certify {
        config: PathBuf,
        /// Report path (default: next to the config, `<stem>.report.json`)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check one ratio a_k/C against the table row for alpha
    Check {
        #[arg(long)]
        alpha: String,
        /// Rational ("p/q", decimal) for the exact path; "re,im" or "a+bi" for the numeric one
        #[arg(long, allow_hyphen_values = true)]
        ratio: String,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Print the criterion table
    Table {
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Classify every reduced p/q in (0, 2) with q <= den-max
    Scan {
        #[arg(long)]
        den_max: u64,
    },
    /// Integrate trajectories and Poincare sections, writing CSV
    Simulate {
        config: PathBuf,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        rel_tol: Option<f64>,
        /// Section as AXIS=VALUE, e.g. y=0
        #[arg(long)]
        section: Option<String>,
        /// up, down or both
        #[arg(long)]
        direction: Option<String>,
        /// Output directory for trajectory.csv and section.csv
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

enum Failure {
    Input(String),
    Aborted(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify { config, out } => cmd_certify(&config, out),
        Command::Check { alpha, ratio, tol } => cmd_check(&alpha, &ratio, tol),
        Command::Table { alpha } => cmd_table(alpha.as_deref()),
        Command::Scan { den_max } => cmd_scan(den_max),
        Command::Simulate {
            config,
            t_final,
            rel_tol,
            section,
            direction,
            out,
        } => cmd_simulate(&config, t_final, rel_tol, section.as_deref(), direction.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Aborted(msg)) => {
            eprintln!("aborted: {msg}");
            ExitCode::from(3)
        }
    }
}

fn parse_alpha(text: &str) -> Result<Rational, Failure> {
    text.parse()
        .map_err(|e| Failure::Input(format!("alpha: {e}")))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn cmd_certify(path: &Path, out: Option<PathBuf>) -> CmdResult {
    let run: RunConfig = config::load(path)?;
    let verdict = certify(&run.config, &run.certify).map_err(|e| Failure::Aborted(e.to_string()))?;
    let report = report::certify_report(&run, &verdict);
    let out = out.unwrap_or_else(|| {
        let stem = path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned());
        path.with_file_name(format!("{stem}.report.json"))
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file(&out, &text)?;

    println!("kind={}, reason={}", verdict.kind.label(), verdict.reason.label());
    println!("{}", report::summary(&verdict));
    if let Some(h) = &verdict.homothetic {
        println!(
            "gauge={}, convention={}, seed={}, direction residual {:.3e}",
            h.gauge, h.convention, h.seed, h.residuals.direction
        );
        for w in &verdict.witnesses {
            println!("  k={}: a_k/C = {}: {}", w.k, w.exponents.ratio, w.outcome());
        }
    }
    if verdict.conventions_disagree() {
        if let Some((other, _)) = &verdict.alternate {
            println!("note: the {other} convention gives a different headline outcome (see report)");
        }
    }
    println!("config digest sha256:{}", run.digest);
    println!("report written to {}", out.display());
    Ok(())
}

fn parse_ratio(text: &str) -> Result<Result<Rational, Complex64>, Failure> {
    if let Ok(r) = Rational::parse_decimal(text) {
        return Ok(Ok(r));
    }
    if let Some((re, im)) = text.split_once(',') {
        if let (Ok(re), Ok(im)) = (re.trim().parse(), im.trim().parse()) {
            return Ok(Err(Complex64::new(re, im)));
        }
    }
    text.parse::<Complex64>()
        .map(Err)
        .map_err(|_| Failure::Input(format!("ratio: cannot parse {text:?} as a rational or complex number")))
}

fn cmd_check(alpha: &str, ratio: &str, tol: Option<f64>) -> CmdResult {
    let alpha = parse_alpha(alpha)?;
    let ratio = parse_ratio(ratio)?;
    let tol = tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(Failure::Input("tol: must be positive".into()));
    }
    let Some(row) = table_row(&alpha) else {
        println!("alpha excluded: non-integrable for all ratios");
        return Ok(());
    };
    let outcome = match &ratio {
        Ok(r) => check_criterion_exact(&alpha, r),
        Err(z) => check_criterion_numeric(&alpha, *z, tol),
    }
    .expect("row exists");
    println!("row {}: α = {}, {} ∈ {}", row.index, row.alpha, row.radical_text(), row.set);
    match &outcome.detail {
        CheckDetail::ExactRoot { radicand, root, .. } => {
            println!("radicand = {radicand}");
            println!("roots = ±{root}");
        }
        CheckDetail::IrrationalRoot { radicand } => {
            println!("radicand = {radicand}");
        }
        CheckDetail::Numeric { radicand, root, .. } => {
            println!("radicand = {radicand}");
            println!("roots = ±{root}");
        }
    }
    println!("{outcome}");
    Ok(())
}

fn cmd_table(alpha: Option<&str>) -> CmdResult {
    match alpha {
        None => {
            for row in criterion_table() {
                println!("{row}");
            }
        }
        Some(text) => match table_row(&parse_alpha(text)?) {
            Some(row) => println!("{row}"),
            None => println!("not in table"),
        },
    }
    Ok(())
}

fn scan_lines(den_max: u64) -> Vec<(Rational, bool)> {
    let mut values = Vec::new();
    for q in 1..=den_max as i64 {
        for p in 1..2 * q {
            let r = Rational::new(p, q);
            if *r.denom() == q.into() {
                values.push(r);
            }
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("rationals are ordered"));
    values
        .into_iter()
        .map(|r| {
            let listed = table_row(&r).is_some();
            (r, listed)
        })
        .collect()
}

fn cmd_scan(den_max: u64) -> CmdResult {
    if den_max == 0 {
        return Err(Failure::Input("den-max: must be at least 1".into()));
    }
    if den_max > 10_000 {
        return Err(Failure::Input("den-max: at most 10000".into()));
    }
    let lines = scan_lines(den_max);
    let mut out = String::new();
    for (alpha, listed) in &lines {
        let status = if *listed {
            "criteria exist"
        } else {
            "non-integrable for all configurations"
        };
        writeln!(out, "{alpha}\t{status}").unwrap();
    }
    let listed = lines.iter().filter(|(_, l)| *l).count();
    writeln!(out, "# {} values scanned, {listed} with criteria", lines.len()).unwrap();
    print!("{out}");
    Ok(())
}

fn parse_section_flag(text: &str) -> Result<(usize, f64), Failure> {
    let err = || Failure::Input(format!("section: expected AXIS=VALUE such as y=0, got {text:?}"));
    let (axis, value) = text.split_once('=').ok_or_else(err)?;
    let axis = config::parse_axis(axis.trim()).ok_or_else(err)?;
    let value = value.trim().parse().map_err(|_| err())?;
    Ok((axis, value))
}

fn state_row(index: usize, t: f64, s: &PhaseState, energy: f64) -> String {
    let mut fields = vec![index.to_string(), report::fmt17(t)];
    fields.extend(s.q.iter().chain(&s.p).map(|x| report::fmt17(*x)));
    fields.push(report::fmt17(energy));
    fields.join(",")
}

fn cmd_simulate(
    path: &Path,
    t_final: Option<f64>,
    rel_tol: Option<f64>,
    section_flag: Option<&str>,
    direction_flag: Option<&str>,
    out: &Path,
) -> CmdResult {
    let run = config::load(path)?;
    let cfg = &run.config;
    let mut opts = run
        .simulate
        .clone()
        .ok_or_else(|| Failure::Input("simulate: missing simulate block".into()))?;
    if let Some(t) = t_final {
        opts.t_final = t;
    }
    if let Some(r) = rel_tol {
        if !(r > 0.0) {
            return Err(Failure::Input("rel-tol: must be positive".into()));
        }
        opts.rel_tol = r;
    }
    if !(opts.t_final > 0.0) {
        return Err(Failure::Input("t_final: must be positive".into()));
    }
    if let Some(text) = section_flag {
        let (axis, value) = parse_section_flag(text)?;
        let mut s = opts.section.take().unwrap_or(config::SectionOptions {
            section: Section {
                axis,
                value,
                direction: SectionDirection::Up,
            },
            energy: None,
            points: Vec::new(),
        });
        s.section.axis = axis;
        s.section.value = value;
        opts.section = Some(s);
    }
    if let Some(text) = direction_flag {
        let direction = config::parse_direction(text)
            .ok_or_else(|| Failure::Input(format!("direction: expected up, down or both, got {text:?}")))?;
        match opts.section.as_mut() {
            Some(s) => s.section.direction = direction,
            None => return Err(Failure::Input("direction: no section configured".into())),
        }
    }
    if opts.initial_states.is_empty() && opts.section.as_ref().is_none_or(|s| s.points.is_empty()) {
        return Err(Failure::Input("simulate.initial_states: nothing to integrate".into()));
    }
    fs::create_dir_all(out).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;

    let mut attempted = 0;
    let mut completed = 0;
    let mut summary = String::new();
    writeln!(summary, "config digest sha256:{}", run.digest).unwrap();
    writeln!(summary, "t_final {}, rel_tol {:e}", opts.t_final, opts.rel_tol).unwrap();

    // With a section configured the initial states seed the section instead.
    if opts.section.is_none() {
        let dim = cfg.dim();
        let mut header = vec!["trajectory".to_string(), "t".to_string()];
        header.extend((0..dim).map(|i| format!("q{i}")));
        header.extend((0..dim).map(|i| format!("p{i}")));
        header.push("energy".into());
        let mut csv = header.join(",") + "\n";
        for (index, state) in opts.initial_states.iter().enumerate() {
            attempted += 1;
            match integrate_flow(cfg, state, opts.t_final, opts.rel_tol, opts.min_center_distance) {
                Ok(traj) => {
                    completed += 1;
                    for (t, s) in traj.times.iter().zip(&traj.states) {
                        let h = hamiltonian(cfg, s).unwrap_or(f64::NAN);
                        csv.push_str(&state_row(index, *t, s, h));
                        csv.push('\n');
                    }
                    writeln!(
                        summary,
                        "trajectory {index}: completed, {} steps, energy drift {:.3e}",
                        traj.times.len() - 1,
                        traj.energy_drift
                    )
                    .unwrap();
                }
                Err(e) => writeln!(summary, "trajectory {index}: failed: {e}").unwrap(),
            }
        }
        let file = out.join("trajectory.csv");
        write_file(&file, &csv)?;
        writeln!(summary, "wrote {}", file.display()).unwrap();
    }

    if let Some(s) = &opts.section {
        let mut ics: Vec<Option<PhaseState>> = opts.initial_states.iter().cloned().map(Some).collect();
        let mut early = Vec::new();
        if let Some(energy) = s.energy {
            for (i, ic) in section_initial_conditions(cfg, energy, &s.section, &s.points)
                .into_iter()
                .enumerate()
            {
                match ic {
                    Ok(state) => ics.push(Some(state)),
                    Err(e) => {
                        early.push((opts.initial_states.len() + i, e));
                        ics.push(None);
                    }
                }
            }
        }
        let valid: Vec<(usize, PhaseState)> = ics
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.clone().map(|s| (i, s)))
            .collect();
        let states: Vec<PhaseState> = valid.iter().map(|(_, s)| s.clone()).collect();
        let section_run = poincare_section(
            cfg,
            s.energy,
            &s.section,
            &states,
            opts.t_final,
            opts.rel_tol,
            opts.min_center_distance,
        )
        .map_err(|e| Failure::Input(e.to_string()))?;
        attempted += ics.len();
        completed += section_run.completed;
        let mut csv = String::from("trajectory,t,coordinate,momentum\n");
        for p in &section_run.points {
            let index = valid[p.trajectory].0;
            writeln!(
                csv,
                "{index},{},{},{}",
                report::fmt17(p.t),
                report::fmt17(p.coordinate),
                report::fmt17(p.momentum)
            )
            .unwrap();
        }
        let file = out.join("section.csv");
        write_file(&file, &csv)?;
        let axis = if s.section.axis == 0 { "x" } else { "y" };
        writeln!(
            summary,
            "section {axis}={} ({:?}): {} points from {} of {} trajectories",
            s.section.value,
            s.section.direction,
            section_run.points.len(),
            section_run.completed,
            ics.len()
        )
        .unwrap();
        let mut failures: Vec<(usize, String)> = early.into_iter().map(|(i, e)| (i, e.to_string())).collect();
        failures.extend(section_run.failures.iter().map(|(i, e)| (valid[*i].0, e.to_string())));
        failures.sort_by_key(|(i, _)| *i);
        for (i, e) in failures {
            writeln!(summary, "section trajectory {i}: failed: {e}").unwrap();
        }
        writeln!(summary, "wrote {}", file.display()).unwrap();
    }

    print!("{summary}");
    if completed == 0 {
        return Err(Failure::Aborted(format!("all {attempted} trajectories failed")));
    }
    Ok(())
}

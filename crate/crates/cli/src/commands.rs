use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use qlode::bifurcation::{count_lower_bound, degeneracy_instant};
use qlode::continuation::{
    continue_branch, distinct_solutions, solve_branch_point, Branch, PeriodicSolution,
    ShootingConfig, SolveError,
};
use qlode::ode::ProblemParams;
use qlode::verify::{verify, VerificationReport};
use qlode::yamabe::{
    critical_radii, curvature_deviation, relative_volume, solution_count_vs_radius, to_ode_params,
    GeometryParams,
};

use crate::document::{
    num, to_json, BranchStatus, CountDocument, Params, SolutionDocument, SCHEMA_VERSION,
};
use crate::error::CliError;

/// Text for stdout, a trailing note for stderr, and the exit status the
/// command settles on after both are written.
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub status: Result<(), CliError>,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            stderr: String::new(),
            status: Ok(()),
        }
    }
}

fn config(grid: usize) -> Result<ShootingConfig, CliError> {
    let cfg = ShootingConfig {
        grid_size: grid,
        ..ShootingConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn params(q: f64, mu: f64, period: f64) -> Result<ProblemParams, CliError> {
    ProblemParams::new(q, mu, period).map_err(|e| CliError::Validation(e.to_string()))
}

/// Writes `text` to `path`, or hands it back for stdout when no path is given.
fn route(path: Option<&Path>, text: String) -> Result<String, CliError> {
    match path {
        Some(p) => {
            fs::write(p, text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn checked(sol: &PeriodicSolution) -> Result<VerificationReport, CliError> {
    verify(sol).map_err(|e| CliError::Verification(e.to_string()))
}

fn verification_status(rep: &VerificationReport, what: &str) -> Result<(), CliError> {
    if rep.all_passed() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{what} did not pass every check"
        )))
    }
}

pub fn instants(q: f64, period: f64, k_max: u32, out: Option<&Path>) -> Result<Output, CliError> {
    let mut csv = String::from("k,mu_k,omega_k\n");
    for k in 1..=k_max {
        let d =
            degeneracy_instant(q, period, k).map_err(|e| CliError::Validation(e.to_string()))?;
        writeln!(csv, "{},{},{}", d.k, num(d.mu_k), num(d.omega_k)).unwrap();
    }
    Ok(Output::ok(route(out, csv)?))
}

pub fn solve(
    q: f64,
    mu: f64,
    period: f64,
    k: u32,
    grid: usize,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<Output, CliError> {
    let p = params(q, mu, period)?;
    let cfg = config(grid)?;
    let sol = solve_branch_point(&p, k, 0.0, &cfg)?;
    info!(
        "branch {k}: u_max = {}, {} Newton iterations",
        sol.a, sol.diagnostics.newton_iterations
    );
    let report = checked(&sol)?;
    let doc = SolutionDocument::new(&sol, report);
    if let Some(path) = csv {
        let mut table = String::from("t,u,du\n");
        for s in &doc.samples {
            writeln!(table, "{},{},{}", num(s.t), num(s.u), num(s.du)).unwrap();
        }
        fs::write(path, table)?;
    }
    let status = verification_status(&doc.verification, "solution");
    Ok(Output {
        stdout: route(out, to_json(&doc))?,
        stderr: String::new(),
        status,
    })
}

pub fn diagram(
    q: f64,
    period: f64,
    mu_max: f64,
    branches: u32,
    grid: usize,
    out: Option<&Path>,
) -> Result<Output, CliError> {
    params(q, mu_max, period)?;
    let cfg = config(grid)?;
    let first =
        degeneracy_instant(q, period, 1).map_err(|e| CliError::Validation(e.to_string()))?;
    if mu_max <= first.mu_k {
        return Err(CliError::NoBranch(format!(
            "mu_max = {mu_max} does not exceed the first degeneracy instant {}",
            first.mu_k
        )));
    }
    let results: Vec<Result<Branch, SolveError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=branches)
            .map(|k| s.spawn(move || continue_branch(q, period, k, mu_max, &cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("branch worker"))
            .collect()
    });
    let mut csv = String::from("branch_k,mu,u_max,u_min,energy,zero_count\n");
    let mut failed = Vec::new();
    let mut notes = String::from("branch status:\n");
    for (k, res) in (1..=branches).zip(results) {
        match res {
            Ok(b) => {
                writeln!(
                    notes,
                    "  k={k}: {} points from mu_k = {}",
                    b.points.len(),
                    b.origin.mu_k
                )
                .unwrap();
                for pt in &b.points {
                    let s = &pt.solution;
                    writeln!(
                        csv,
                        "{k},{},{},{},{},{}",
                        num(pt.mu),
                        num(s.a),
                        num(s.u_min),
                        num(s.energy),
                        s.zero_count
                    )
                    .unwrap();
                }
            }
            Err(e @ SolveError::BelowInstant { .. }) => {
                writeln!(notes, "  k={k}: skipped, {e}").unwrap()
            }
            Err(e) => {
                writeln!(notes, "  k={k}: failed, {e}").unwrap();
                failed.push(k);
            }
        }
    }
    let status = if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Solver(format!(
            "continuation failed for branches {failed:?}"
        )))
    };
    Ok(Output {
        stdout: route(out, csv)?,
        stderr: notes,
        status,
    })
}

fn status_of(sol: &PeriodicSolution) -> (BranchStatus, bool) {
    let (status, passed) = match verify(sol) {
        Ok(rep) if rep.all_passed() => ("verified".to_string(), true),
        Ok(_) => ("failed verification".to_string(), false),
        Err(e) => (format!("rejected: {e}"), false),
    };
    (
        BranchStatus {
            k: sol.k,
            status,
            zero_count: Some(sol.zero_count),
            u_max: Some(sol.a),
            u_min: Some(sol.u_min),
        },
        passed,
    )
}

pub fn count(
    q: f64,
    mu: f64,
    period: f64,
    grid: usize,
    json: Option<&Path>,
) -> Result<Output, CliError> {
    let p = params(q, mu, period)?;
    let cfg = config(grid)?;
    let set = distinct_solutions(q, period, mu, &cfg)?;
    let mut rows = vec![status_of(&set.constant)];
    let mut solver_failures = 0;
    for b in &set.branches {
        match &b.result {
            Ok(sol) => rows.push(status_of(sol)),
            Err(e) => {
                solver_failures += 1;
                rows.push((
                    BranchStatus {
                        k: b.k,
                        status: format!("error: {e}"),
                        zero_count: None,
                        u_max: None,
                        u_min: None,
                    },
                    false,
                ));
            }
        }
    }
    for f in &set.findings {
        warn!(
            "branch {}: distinct orbits with energies {:?}",
            f.k, f.energies
        );
    }
    let found = rows.iter().filter(|(_, ok)| *ok).count();
    let unverified = rows.len() - found - solver_failures;
    let doc = CountDocument {
        schema_version: SCHEMA_VERSION,
        params: Params::from(&p),
        lower_bound: set.lower_bound,
        found,
        branches: rows.into_iter().map(|(s, _)| s).collect(),
    };
    let mut text = format!("lower_bound={} found={}\n", doc.lower_bound, doc.found);
    for b in &doc.branches {
        write!(text, "k={} status={}", b.k, b.status).unwrap();
        if let (Some(z), Some(a), Some(m)) = (b.zero_count, b.u_max, b.u_min) {
            write!(text, " zero_count={z} u_max={} u_min={}", num(a), num(m)).unwrap();
        }
        text.push('\n');
    }
    if let Some(path) = json {
        fs::write(path, to_json(&doc))?;
    }
    let status = if solver_failures > 0 {
        Err(CliError::Solver(format!(
            "{solver_failures} branch(es) could not be solved"
        )))
    } else if unverified > 0 {
        Err(CliError::Verification(format!(
            "{unverified} solution(s) failed verification"
        )))
    } else {
        Ok(())
    };
    Ok(Output {
        stdout: text,
        stderr: String::new(),
        status,
    })
}

pub fn yamabe(
    n: u32,
    r_n: f64,
    radii: &[f64],
    grid: usize,
    out_dir: Option<&Path>,
) -> Result<Output, CliError> {
    let cfg = config(grid)?;
    if radii.is_empty() {
        return Err(CliError::Validation(
            "at least one radius is required".into(),
        ));
    }
    let g = GeometryParams::new(n, r_n, radii[0])?;
    for &r in radii {
        g.with_radius(r)?;
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Validation(
            "radii must be strictly increasing".into(),
        ));
    }
    if radii.len() > 1 {
        return yamabe_table(&g, radii, &cfg);
    }
    let p = to_ode_params(&g);
    let set = distinct_solutions(p.q(), p.period(), p.mu(), &cfg)?;
    let unit = critical_radii(&g, 1)[0];
    let below: Vec<String> = (1..=count_lower_bound(p.q(), p.period(), p.mu()))
        .map(|k| num(f64::from(k) * unit))
        .collect();
    let mut text = format!("n={n} R_N={} r={}\n", num(r_n), num(g.radius()));
    writeln!(text, "q={} mu={}", num(p.q()), num(p.mu())).unwrap();
    writeln!(text, "critical_radii_below_r=[{}]", below.join(",")).unwrap();
    text.push_str("k,u_max,u_min,zero_count,curvature_deviation,relative_volume,verified\n");
    let mut failures = Vec::new();
    for sol in set.solutions() {
        let dev = curvature_deviation(&g, sol)?;
        let vol = relative_volume(&g, sol)?;
        let rep = verify(sol).ok();
        let ok = rep.as_ref().is_some_and(VerificationReport::all_passed);
        if !ok {
            failures.push(sol.k);
        }
        writeln!(
            text,
            "{},{},{},{},{},{},{}",
            sol.k,
            num(sol.a),
            num(sol.u_min),
            sol.zero_count,
            num(dev),
            num(vol),
            ok
        )
        .unwrap();
        if let (Some(dir), Some(rep)) = (out_dir, rep) {
            fs::create_dir_all(dir)?;
            fs::write(
                dir.join(format!("factor_k{}.json", sol.k)),
                to_json(&SolutionDocument::new(sol, rep)),
            )?;
        }
    }
    let mut status = Ok(());
    let mut notes = String::new();
    for b in &set.branches {
        if let Err(e) = &b.result {
            writeln!(notes, "k={}: {e}", b.k).unwrap();
            status = Err(CliError::Solver(format!(
                "branch {} could not be solved",
                b.k
            )));
        }
    }
    if status.is_ok() && !failures.is_empty() {
        status = Err(CliError::Verification(format!(
            "factors {failures:?} failed verification"
        )));
    }
    Ok(Output {
        stdout: text,
        stderr: notes,
        status,
    })
}

fn yamabe_table(
    g: &GeometryParams,
    radii: &[f64],
    cfg: &ShootingConfig,
) -> Result<Output, CliError> {
    let rows = solution_count_vs_radius(g, radii, cfg)?;
    let mut text = String::from("r,lower_bound,found\n");
    let mut notes = String::new();
    for row in &rows {
        writeln!(text, "{},{},{}", num(row.r), row.lower_bound, row.found).unwrap();
        for f in &row.failures {
            writeln!(notes, "r={}: {f}", row.r).unwrap();
        }
    }
    let failed = !notes.is_empty();
    let status = if failed {
        Err(CliError::Solver(
            "some radii had unsolved or unverified branches".into(),
        ))
    } else {
        Ok(())
    };
    Ok(Output {
        stdout: text,
        stderr: notes,
        status,
    })
}

pub fn verify_document(input: &Path, out: Option<&Path>) -> Result<Output, CliError> {
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", input.display())))?;
    let doc = SolutionDocument::parse(&text)?;
    let sol = doc.to_solution()?;
    let report = checked(&sol)?;
    let status = verification_status(&report, "document");
    Ok(Output {
        stdout: route(out, to_json(&report))?,
        stderr: String::new(),
        status,
    })
}

use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Result};
use gmin::asymptotics::{analyze, tail_probability, Asymptotics, MuFunction};
use gmin::mc::{conditional_samples, MCReport, PathGrid};
use gmin::solver::{breakpoint_solve, Breakpoint};
use gmin::{solve as solve_measure, Error, Family, Kernel, OptimalSolution};

use crate::config::RunConfig;
use crate::output::{csv, format_float, json, Sink};

pub const EXIT_DEGENERATE: u8 = 2;
pub const EXIT_LOW_ESS: u8 = 3;

const FLAT_MESSAGE: &str = "continuous-support minimizer detected";

fn solved(cfg: &RunConfig) -> Result<(Kernel, OptimalSolution)> {
    let kernel = cfg.kernel()?;
    let interval = cfg.interval(&kernel)?;
    let sol = solve_measure(&kernel, &interval, &cfg.solver)?;
    Ok((kernel, sol))
}

fn flat_exit() -> ExitCode {
    eprintln!("{FLAT_MESSAGE}: the optimal measure has no finite support");
    ExitCode::from(EXIT_DEGENERATE)
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format_float(*x)).collect();
    format!("[{}]", items.join(", "))
}

pub fn solution_summary(sol: &OptimalSolution) -> String {
    format!(
        "interval [{}, {}]\natoms    {}\nweights  {}\nV*       {}\nkkt_min  {} ({} points)\nconverged {}",
        format_float(sol.interval.a),
        format_float(sol.interval.b),
        list(sol.support()),
        list(sol.weights()),
        format_float(sol.v_star),
        format_float(sol.kkt_min),
        sol.kkt_grid_n,
        sol.converged
    )
}

pub fn solve(cfg: &RunConfig) -> Result<ExitCode> {
    let sink = Sink::new(cfg.out.as_deref())?;
    let (_, sol) = solved(cfg)?;
    sink.emit("solution.json", &json(&sol.record())?)?;
    if sol.degenerate_flat {
        return Ok(flat_exit());
    }
    sink.say(&solution_summary(&sol));
    if !sol.converged {
        bail!("solver did not certify optimality (kkt_min = {})", sol.kkt_min);
    }
    Ok(ExitCode::SUCCESS)
}

fn analyzed(cfg: &RunConfig) -> Result<Result<Asymptotics, ExitCode>> {
    let (kernel, sol) = solved(cfg)?;
    if sol.degenerate_flat {
        return Ok(Err(flat_exit()));
    }
    Ok(Ok(analyze(&kernel, &sol, &cfg.asymptotic_options())?))
}

/// `o(u^-k exp(-u^2/2V*))`, the only statement available when E(W) = 0.
pub fn degenerate_statement(k: usize) -> String {
    format!("degenerate: P = o(u^-{k} exp(-u^2/2V*))")
}

pub fn asym(cfg: &RunConfig) -> Result<ExitCode> {
    let sink = Sink::new(cfg.out.as_deref())?;
    let a = match analyzed(cfg)? {
        Ok(a) => a,
        Err(code) => return Ok(code),
    };
    let r = &a.report;
    sink.emit("asymptotics.json", &json(r)?)?;
    let w = &r.expected_w;
    sink.say(&format!(
        "k        {}\ntheta    {}\nV*       {}\nc        {}\nE(W)     {} ± {} ({:?})",
        r.k,
        list(&r.theta),
        format_float(r.v_star),
        format_float(r.c_const),
        format_float(w.mean),
        format_float(w.ci_half_width),
        w.method
    ));
    if !r.nondegenerate {
        sink.say(&degenerate_statement(r.k));
        return Ok(ExitCode::SUCCESS);
    }
    sink.say(&format!("constant {}", format_float(r.prefactor.unwrap_or(f64::NAN))));
    let mut rows = Vec::new();
    for &u in &cfg.asymptotics.u {
        match tail_probability(r, u) {
            Ok(p) => rows.push(vec![u, p]),
            Err(Error::InvalidInput(msg)) => bail!("{msg}"),
            Err(e) => return Err(e.into()),
        }
    }
    let table = csv(&["u", "tail"], rows)?;
    sink.attach("tail.csv", &table)?;
    sink.say(table.trim_end());
    Ok(ExitCode::SUCCESS)
}

fn ratio_table(reports: &[MCReport]) -> String {
    let mut s = String::from("u\tp_hat\tci_lo\tci_hi\tformula\tratio\tess\n");
    for r in reports {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.0}{}\n",
            format_float(r.u),
            format_float(r.p_hat),
            format_float(r.ci[0]),
            format_float(r.ci[1]),
            opt(r.formula_value),
            opt(r.ratio),
            r.ess,
            if r.low_ess_warning { "\tLOW ESS" } else { "" }
        ));
    }
    s
}

pub fn verify(cfg: &RunConfig, strict: bool) -> Result<ExitCode> {
    let sink = Sink::new(cfg.out.as_deref())?;
    let a = match analyzed(cfg)? {
        Ok(a) => a,
        Err(code) => return Ok(code),
    };
    if !a.report.nondegenerate {
        sink.say(&degenerate_statement(a.report.k));
        bail!("verification needs a nondegenerate configuration (E(W) = 0)");
    }
    let v = &cfg.verify;
    let grid = PathGrid::uniform(&a.kernel, &a.solution.interval, v.grid_m, &a.essential.locations())?;
    let mut reports = Vec::new();
    for &u in &v.u {
        let ens = conditional_samples(&a, &grid, u, v.n, v.seed)?;
        let tag = format_float(u);
        let triples = ens
            .samples
            .iter()
            .map(|s| vec![s.overshoot, s.argmin, s.lr_scaled]);
        sink.attach(&format!("samples_u{tag}.csv"), &csv(&["overshoot", "argmin", "lr_weight"], triples)?)?;
        let curves = (0..ens.grid.len()).map(|i| {
            let (m, se) = (ens.fluctuation_mean[i], ens.fluctuation_stderr[i]);
            vec![ens.grid[i], m, m - 2.0 * se, m + 2.0 * se]
        });
        sink.attach(&format!("fluctuation_u{tag}.csv"), &csv(&["t", "mean", "lo", "hi"], curves)?)?;
        if ens.low_neff_warning {
            sink.say(&format!("warning: u = {tag}: only {:.0} effective conditional samples", ens.n_eff));
        }
        reports.push(ens.report);
    }
    sink.emit("verify.json", &json(&reports)?)?;
    sink.say(ratio_table(&reports).trim_end());
    if strict && reports.iter().any(|r| r.low_ess_warning) {
        eprintln!("strict mode: effective sample size below threshold");
        return Ok(ExitCode::from(EXIT_LOW_ESS));
    }
    Ok(ExitCode::SUCCESS)
}

pub const MU_PLOT_POINTS: usize = 2001;

pub fn mu_plot(cfg: &RunConfig) -> Result<ExitCode> {
    let sink = Sink::new(cfg.out.as_deref())?;
    let (kernel, sol) = solved(cfg)?;
    if sol.degenerate_flat {
        return Ok(flat_exit());
    }
    let mu = MuFunction::new(&kernel, &sol)?;
    let rows = sol
        .interval
        .uniform_grid(MU_PLOT_POINTS)
        .into_iter()
        .map(|t| vec![t, mu.eval(t, 0)]);
    sink.emit("mu.csv", &csv(&["t", "mu"], rows)?)?;
    sink.say(&format!("wrote {MU_PLOT_POINTS} points of mu on [{}, {}]", sol.interval.a, sol.interval.b));
    Ok(ExitCode::SUCCESS)
}

pub fn breakpoints(family: Family, out: Option<&Path>) -> Result<ExitCode> {
    let sink = Sink::new(out)?;
    let c1 = breakpoint_solve(family, Breakpoint::C1)?;
    let c2 = breakpoint_solve(family, Breakpoint::C2)?;
    let name = match family {
        Family::Gaussian => "gaussian",
        Family::Sinc => "sinc",
    };
    let mut s = String::from("family,c1,c2\n");
    s.push_str(&format!("{name},{},{}\n", format_float(c1), format_float(c2)));
    sink.emit("breakpoints.csv", &s)?;
    sink.say(&format!("{name}: c1 = {c1:.6}, c2 = {c2:.6}"));
    Ok(ExitCode::SUCCESS)
}

//! Subcommand implementations.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use cc_core::evolution::{build_us, compose_u, default_mu, sample_disorder, ScatteringParams};
use cc_core::experiments::{
    default_q_grid, run_circulation, run_conductance, run_multifractal, run_zz, CirculationRun, ConductanceRun,
    ContactSpec, MultifractalRun, ZzRun,
};
use cc_core::fock::{bread_identity, gaussian_supertrace, random_unitary, wick_check};
use cc_core::lattice::{build_medial, NetworkGeometry, Sublattice, Topology};
use cc_core::spectral::{bloch_eigenphases, quadruplets};
use cc_core::validation::{run_exactness, ValidationOptions};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_list, Settings};
use crate::output::{num, Sink};
use crate::plot::{render, PlotSpec, Series};
use crate::{CliError, Command, Common, EnsembleArgs};

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Validate {
            l,
            seed,
            swap_turns,
            common,
        } => validate(l, seed, swap_turns, &common),
        Command::DumpGeometry { lx, ly, topology, common } => dump_geometry(lx, ly, topology, &common),
        Command::Spectrum { l, quad_l, seed, common } => spectrum(l, quad_l, seed, &common),
        Command::SigmaScan {
            l,
            mu,
            box_size,
            rmin,
            rmax,
            resamples,
            ensemble,
            common,
        } => sigma_scan(l, mu, box_size, rmin, rmax, resamples, &ensemble, &common),
        Command::Conductance { l, ensemble, common } => conductance(l, &ensemble, &common),
        Command::Multifractal {
            l,
            q,
            rmin,
            rmax,
            resamples,
            contacts,
            ensemble,
            common,
        } => multifractal(l, q, rmin, rmax, resamples, contacts, &ensemble, &common),
        Command::Circulation {
            l,
            sides,
            contacts,
            ensemble,
            common,
        } => circulation(l, sides, contacts, &ensemble, &common),
        Command::FockCheck {
            links,
            nmax,
            mu,
            seed,
            common,
        } => fock_check(links, nmax, mu, seed, &common),
        Command::Plot {
            input,
            x,
            y,
            output,
            logx,
            logy,
            slope,
            title,
        } => plot(&input, &x, &y, &output, logx, logy, slope, title),
    }
}

fn settings(common: &Common) -> Result<Settings, CliError> {
    Settings::load(common.config.as_deref())
}

fn sink(common: &Common, s: &Settings, command: &str) -> Result<Sink, CliError> {
    let dir: PathBuf = s.get(common.out.clone(), "out", || PathBuf::from("."))?;
    let stem: String = s.get(common.name.clone(), "name", || command.to_string())?;
    Sink::new(&dir, &stem)
}

/// Seed, sample count, β and checkpoint after precedence.
struct Ens {
    seed: u64,
    samples: u64,
    beta: f64,
    checkpoint: Option<PathBuf>,
}

fn ensemble(e: &EnsembleArgs, s: &Settings, samples: u64) -> Result<Ens, CliError> {
    Ok(Ens {
        seed: s.get(e.seed, "seed", || 2026)?,
        samples: s.get(e.samples, "samples", || samples)?,
        beta: s.get(e.beta, "beta", || FRAC_PI_4)?,
        checkpoint: s.get_opt(e.checkpoint.clone(), "checkpoint")?,
    })
}

fn contact(flag: Option<String>, s: &Settings) -> Result<Option<ContactSpec>, CliError> {
    match s.get_opt(flag, "contacts")? {
        None => Ok(None),
        Some(text) => {
            let list = ContactSpec::parse_list(&text)?;
            match list.as_slice() {
                [c] => Ok(Some(*c)),
                _ => Err(CliError::Config(format!("exactly one contact is supported, got {}", list.len()))),
            }
        }
    }
}

fn validate(l: Option<usize>, seed: Option<u64>, swap_turns: bool, common: &Common) -> Result<(), CliError> {
    let s = settings(common)?;
    let opts = ValidationOptions {
        l: s.get(l, "l", || 8)?,
        seed: s.get(seed, "seed", || 1)?,
        swap_turns,
    };
    let out = s.get_opt(common.out.clone(), "out")?;
    let name: String = s.get(common.name.clone(), "name", || "validate".into())?;
    s.finish()?;
    let results = run_exactness(&opts)?;
    println!("{:<3} {:<42} {:>12} {:>10}  result", "#", "check", "value", "tol");
    for r in &results {
        println!(
            "{:<3} {:<42} {:>12.3e} {:>10.1e}  {}",
            r.id,
            r.name,
            r.value,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if let Some(dir) = out {
        let sink = Sink::new(&dir, &name)?;
        sink.manifest("validate", &opts, &json!({ "checks": results, "failed": failed }))?;
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} exactness checks failed")));
    }
    Ok(())
}

fn topology(s: &str) -> Result<Topology, CliError> {
    match s {
        "torus" => Ok(Topology::Torus),
        "cylinder" | "cylinder-x" => Ok(Topology::CylinderX),
        other => Err(CliError::Config(format!("unknown topology `{other}` (torus, cylinder)"))),
    }
}

fn opt_id(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sub(s: Sublattice) -> &'static str {
    match s {
        Sublattice::A => "A",
        Sublattice::B => "B",
    }
}

fn dump_geometry(lx: Option<usize>, ly: Option<usize>, topo: Option<String>, common: &Common) -> Result<(), CliError> {
    let s = settings(common)?;
    let lx = s.get(lx, "lx", || 8)?;
    let ly = s.get(ly, "ly", || lx)?;
    let topo_name: String = s.get(topo, "topology", || "torus".into())?;
    let mut sink = sink(common, &s, "geometry")?;
    s.finish()?;
    let g = NetworkGeometry::new(lx, ly, topology(&topo_name)?)?;
    let m = build_medial(&g);
    let header = ["id", "tail", "head", "orientation", "class"];
    let links: Vec<Vec<String>> = g
        .links()
        .iter()
        .map(|l| {
            vec![
                l.id.to_string(),
                opt_id(l.tail),
                opt_id(l.head),
                l.orientation.as_str().to_string(),
                l.class.to_string(),
            ]
        })
        .collect();
    sink.csv(".links.csv", &header, &links)?;
    let nodes: Vec<Vec<String>> = g
        .nodes()
        .iter()
        .map(|n| vec![n.id.to_string(), n.x.to_string(), n.y.to_string(), sub(n.sublattice).to_string()])
        .collect();
    sink.csv(".nodes.csv", &["id", "x", "y", "sublattice"], &nodes)?;
    // medial edges: tail/head are 0-cells, orientation is the traversal direction
    let edges: Vec<Vec<String>> = m
        .edges
        .iter()
        .map(|e| {
            vec![
                e.id.to_string(),
                e.tail.to_string(),
                e.head.to_string(),
                if e.direction.im > 0.0 { "1+i" } else { "1-i" }.to_string(),
                sub(g.node(e.node).sublattice).to_string(),
            ]
        })
        .collect();
    sink.csv(".medial.csv", &header, &edges)?;
    let cells: Vec<Vec<String>> = m
        .zero_cells
        .iter()
        .map(|c| (0, c))
        .chain(m.two_cells.iter().map(|c| (2, c)))
        .map(|(dim, c)| {
            vec![
                c.id.to_string(),
                dim.to_string(),
                c.corner.0.to_string(),
                c.corner.1.to_string(),
                num(c.center.re),
                num(c.center.im),
            ]
        })
        .collect();
    sink.csv(".cells.csv", &["id", "dim", "corner_x", "corner_y", "center_x", "center_y"], &cells)?;
    sink.manifest(
        "dump-geometry",
        &json!({ "lx": lx, "ly": ly, "topology": topo_name }),
        &json!({ "links": g.n_links(), "nodes": g.n_nodes(), "medial_edges": m.n_edges(), "rotation": m.rotation }),
    )?;
    Ok(())
}

fn spectrum(l: Option<usize>, quad_l: Option<usize>, seed: Option<u64>, common: &Common) -> Result<(), CliError> {
    let s = settings(common)?;
    let l = s.get(l, "l", || 8)?;
    let ql = s.get(quad_l, "quad-l", || 4)?;
    let seed = s.get(seed, "seed", || 1)?;
    let mut sink = sink(common, &s, "spectrum")?;
    s.finish()?;
    let g = NetworkGeometry::new(l, l, Topology::Torus)?;
    let rows: Vec<Vec<String>> = bloch_eigenphases::<f64>(&g)
        .into_iter()
        .map(|(k, idx, w)| vec![num(k[0]), num(k[1]), idx.to_string(), num(w)])
        .collect();
    sink.csv(".csv", &["k_x", "k_y", "l", "eigphase"], &rows)?;
    let gq = NetworkGeometry::new(ql, ql, Topology::Torus)?;
    let u = compose_u(&build_us::<f64>(&gq, &ScatteringParams::critical()), &sample_disorder(&gq, seed, 0))?;
    let reports = quadruplets(&gq, &u)?;
    let worst = reports
        .iter()
        .flat_map(|r| r.residuals.iter().copied().chain([r.input_residual]))
        .fold(0.0, f64::max);
    sink.json(".quadruplets.json", &reports)?;
    sink.manifest(
        "spectrum",
        &json!({ "l": l, "quad_l": ql, "seed": seed }),
        &json!({ "eigenphases": rows.len(), "quadruplets": reports.len(), "max_residual": worst }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<T: Serialize> {
    estimate: f64,
    stderr: f64,
    window: Option<[f64; 2]>,
    samples: u64,
    seed: u64,
    skipped: usize,
    #[serde(flatten)]
    extra: T,
}

#[allow(clippy::too_many_arguments)]
fn sigma_scan(
    l: Option<usize>,
    mu: Option<f64>,
    box_size: Option<usize>,
    rmin: Option<f64>,
    rmax: Option<f64>,
    resamples: Option<usize>,
    e: &EnsembleArgs,
    common: &Common,
) -> Result<(), CliError> {
    let s = settings(common)?;
    let l = s.get(l, "l", || 32)?;
    let ens = ensemble(e, &s, 1000)?;
    let run = ZzRun {
        l,
        beta: ens.beta,
        mu: s.get(mu, "mu", || default_mu(l))?,
        seed: ens.seed,
        samples: ens.samples,
        box_size: s.get(box_size, "box", || 16.min(l))?,
        r_min: s.get(rmin, "rmin", || 2.0)?,
        r_max: s.get(rmax, "rmax", || (l / 4).min(8) as f64)?,
        resamples: s.get(resamples, "resamples", || 200)?,
    };
    let mut sink = sink(common, &s, "sigma-scan")?;
    s.finish()?;
    let out = run_zz(&run, ens.checkpoint.as_deref())?;
    let means: Vec<f64> = out.acc.stats.iter().map(|w| w.mean).collect();
    let tables = out.layout.tables(&means, None);
    let mut rows = Vec::with_capacity(tables.classes.len());
    for (k, c) in tables.classes.iter().enumerate() {
        let st = &out.acc.stats[4 * k..4 * k + 4];
        let conn = tables.upsilon_connected[k].value;
        rows.push(vec![
            c.dx.to_string(),
            c.dy.to_string(),
            num(st[0].mean),
            num(st[1].mean),
            num(st[2].mean),
            num(st[3].mean),
            st[0].n.to_string(),
            num(st[0].stderr()),
            num(st[1].stderr()),
            num(st[2].stderr()),
            num(st[3].stderr()),
            if c.first_a { "A" } else { "B" }.to_string(),
            num(conn.re),
            num(conn.im),
        ]);
    }
    sink.csv(
        ".csv",
        &[
            "dx",
            "dy",
            "re_szz",
            "im_szz",
            "re_uzz",
            "im_uzz",
            "n_samples",
            "stderr_re_szz",
            "stderr_im_szz",
            "stderr_re_uzz",
            "stderr_im_uzz",
            "sub",
            "re_uzz_connected",
            "im_uzz_connected",
        ],
        &rows,
    )?;
    let est = out.estimate?;
    let m = build_medial(&NetworkGeometry::new(l, l, Topology::Torus)?);
    let summary = Summary {
        estimate: est.level.n_hat,
        stderr: est.n_hat_err,
        window: Some([run.r_min, run.r_max]),
        samples: est.samples,
        seed: run.seed,
        skipped: out.acc.skipped.len(),
        extra: json!({
            "observable": "n_hat",
            "exponent": est.level.exponent,
            "exponent_stderr": est.exponent_err,
            "ratio_re": est.ratio.ratio.re,
            "ratio_im": est.ratio.ratio.im,
            "ratio_re_stderr": est.ratio_re_err,
            "ratio_im_stderr": est.ratio_im_err,
            "ratio_raw_re": est.ratio_raw.ratio.re,
            "ratio_raw_im": est.ratio_raw.ratio.im,
            "mu": run.mu,
            "rotation": m.rotation,
            "weight_convention": "j10(e) = sum_l 2^(-3/2) exp(-i theta_l) j(l); entries divided by dw dw'",
        }),
    };
    sink.manifest("sigma-scan", &run, &summary)?;
    println!(
        "n_hat = {:.4} ± {:.4}, exponent = {:.3} ± {:.3}, ratio = {:.3}{:+.3}i ± {:.3}",
        est.level.n_hat, est.n_hat_err, est.level.exponent, est.exponent_err, est.ratio.ratio.re, est.ratio.ratio.im, est.ratio_re_err
    );
    Ok(())
}

fn conductance(l: Option<usize>, e: &EnsembleArgs, common: &Common) -> Result<(), CliError> {
    let s = settings(common)?;
    let l = s.get(l, "l", || 16)?;
    let ens = ensemble(e, &s, 2000)?;
    let mut sink = sink(common, &s, "conductance")?;
    s.finish()?;
    let run = ConductanceRun {
        l,
        beta: ens.beta,
        seed: ens.seed,
        samples: ens.samples,
    };
    let r = run_conductance(&run, ens.checkpoint.as_deref())?;
    sink.csv(
        ".csv",
        &["l", "n_samples", "mean_g", "stderr_g", "mean_imag", "skipped"],
        &[vec![
            l.to_string(),
            r.samples.to_string(),
            num(r.mean),
            num(r.stderr),
            num(r.mean_imag),
            r.skipped.to_string(),
        ]],
    )?;
    let summary = Summary {
        estimate: r.mean,
        stderr: r.stderr,
        window: None,
        samples: r.samples,
        seed: run.seed,
        skipped: r.skipped,
        extra: json!({ "observable": "mean_conductance", "rows": [l / 4, 3 * l / 4] }),
    };
    sink.manifest("conductance", &run, &summary)?;
    println!("<G>(L={l}) = {:.4} ± {:.4}", r.mean, r.stderr);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn multifractal(
    l: Option<usize>,
    q: Option<String>,
    rmin: Option<f64>,
    rmax: Option<f64>,
    resamples: Option<usize>,
    contacts: Option<String>,
    e: &EnsembleArgs,
    common: &Common,
) -> Result<(), CliError> {
    let s = settings(common)?;
    let l = s.get(l, "l", || 64)?;
    let ens = ensemble(e, &s, 3000)?;
    let q = match s.get_opt(q, "q")? {
        Some(text) => parse_list(&text)?,
        None => default_q_grid(),
    };
    let run = MultifractalRun {
        l,
        beta: ens.beta,
        seed: ens.seed,
        samples: ens.samples,
        q,
        r_min: s.get(rmin, "rmin", || 2.0)?,
        r_max: s.get(rmax, "rmax", || (l / 4) as f64)?,
        resamples: s.get(resamples, "resamples", || 200)?,
        contact: contact(contacts, &s)?,
    };
    let mut sink = sink(common, &s, "multifractal")?;
    s.finish()?;
    let out = run_multifractal(&run, ens.checkpoint.as_deref())?;
    let fit = out.fit?;
    let rows: Vec<Vec<String>> = (0..fit.q.len())
        .map(|i| {
            vec![
                num(fit.q[i]),
                num(fit.x_q[i]),
                num(fit.x_q_err[i]),
                num(fit.delta_q[i]),
                num(fit.delta_q_err[i]),
            ]
        })
        .collect();
    sink.csv(".csv", &["q", "Xq", "Xq_err", "Dq", "Dq_err"], &rows)?;
    let summary = Summary {
        estimate: fit.x,
        stderr: fit.x_err,
        window: Some([fit.r_min, fit.r_max]),
        samples: fit.samples as u64,
        seed: run.seed,
        skipped: out.acc.skipped.len(),
        extra: json!({ "observable": "X", "X": fit.x, "X_err": fit.x_err, "weyl": fit.weyl }),
    };
    sink.manifest("multifractal", &run, &summary)?;
    println!("X = {:.4} ± {:.4}", fit.x, fit.x_err);
    Ok(())
}

fn circulation(
    l: Option<usize>,
    sides: Option<String>,
    contacts: Option<String>,
    e: &EnsembleArgs,
    common: &Common,
) -> Result<(), CliError> {
    let s = settings(common)?;
    let l = s.get(l, "l", || 16)?;
    let ens = ensemble(e, &s, 10_000)?;
    let sides = match s.get_opt(sides, "sides")? {
        Some(text) => parse_list(&text)?,
        None => vec![2, 3, 4, 5, 6],
    };
    let run = CirculationRun {
        l,
        beta: ens.beta,
        seed: ens.seed,
        samples: ens.samples,
        sides,
        contact: contact(contacts, &s)?,
    };
    let mut sink = sink(common, &s, "circulation")?;
    s.finish()?;
    let res = run_circulation(&run, ens.checkpoint.as_deref())?;
    let rows: Vec<Vec<String>> = res
        .iter()
        .map(|r| {
            vec![
                r.side.to_string(),
                num(r.mean),
                num(r.stderr),
                num(r.mean_abs),
                num(r.normalized),
                r.samples.to_string(),
            ]
        })
        .collect();
    sink.csv(".csv", &["side", "mean", "stderr", "mean_abs", "normalized", "n_samples"], &rows)?;
    let worst = res.iter().map(|r| r.normalized).fold(0.0, f64::max);
    let summary = Summary {
        estimate: worst,
        stderr: 0.0,
        window: None,
        samples: res.first().map_or(0, |r| r.samples),
        seed: run.seed,
        skipped: 0,
        extra: json!({ "observable": "max normalized circulation", "per_side": res }),
    };
    sink.manifest("circulation", &run, &summary)?;
    for r in &res {
        println!("side {}: {:+.4e} ± {:.1e} (normalized {:.3})", r.side, r.mean, r.stderr, r.normalized);
    }
    Ok(())
}

fn fock_check(
    links: Option<usize>,
    nmax: Option<usize>,
    mu: Option<f64>,
    seed: Option<u64>,
    common: &Common,
) -> Result<(), CliError> {
    let s = settings(common)?;
    let links = s.get(links, "links", || 2)?;
    let nmax = s.get(nmax, "nmax", || 40)?;
    let mu = s.get(mu, "mu", || -1.0)?;
    let seed = s.get(seed, "seed", || 1)?;
    let out = s.get_opt(common.out.clone(), "out")?;
    let name: String = s.get(common.name.clone(), "name", || "fock-check".into())?;
    s.finish()?;
    if !(1..=2).contains(&links) {
        return Err(CliError::Config(format!("--links must be 1 or 2, got {links}")));
    }
    let tol = 1e-8;
    let u = random_unitary(links, seed);
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let xi = [
        Complex64::new(mu, 0.3),
        Complex64::new(-0.2, 1.1),
        Complex64::new(-mu, -0.4),
        Complex64::new(0.9, 0.2),
    ];
    let b = bread_identity(xi, nmax)?;
    rows.push(("scalar trace identity".into(), b.difference, b.tail_bound.max(1e-14)));
    let st = gaussian_supertrace(&u, mu, nmax, tol)?;
    rows.push(("supertrace and determinants".into(), st.max_difference, tol));
    for l1 in 0..links {
        for l2 in 0..links {
            let w = wick_check(&u, mu, l1, l2, nmax, tol)?;
            rows.push((format!("Wick contractions ({l1},{l2})"), w.max_difference, tol));
        }
    }
    println!("{:<32} {:>12} {:>10}  result", "identity", "residual", "tol");
    let mut failed = 0;
    for (n, v, t) in &rows {
        let ok = *v < *t;
        failed += usize::from(!ok);
        println!("{n:<32} {v:>12.3e} {t:>10.1e}  {}", if ok { "PASS" } else { "FAIL" });
    }
    if let Some(dir) = out {
        let mut sink = Sink::new(&dir, &name)?;
        let csv_rows: Vec<Vec<String>> = rows.iter().map(|(n, v, t)| vec![n.clone(), num(*v), num(*t)]).collect();
        sink.csv(".csv", &["identity", "residual", "tolerance"], &csv_rows)?;
        sink.manifest(
            "fock-check",
            &json!({ "links": links, "nmax": nmax, "mu": mu, "seed": seed }),
            &json!({ "failed": failed }),
        )?;
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} Fock identities failed")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn plot(
    input: &Path,
    x: &str,
    y: &str,
    output: &Path,
    logx: bool,
    logy: bool,
    slope: Option<String>,
    title: Option<String>,
) -> Result<(), CliError> {
    let mut rdr = csv::Reader::from_path(input).map_err(|e| CliError::Config(format!("cannot read {}: {e}", input.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("no column `{name}` in {}", input.display())))
    };
    let xi = col(x)?;
    let ys: Vec<(String, usize)> = y
        .split(',')
        .map(|n| col(n.trim()).map(|i| (n.trim().to_string(), i)))
        .collect::<Result<_, _>>()?;
    let mut series: Vec<Series> = ys
        .iter()
        .map(|(n, _)| Series {
            name: n.clone(),
            points: Vec::new(),
        })
        .collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let parse = |i: usize| rec.get(i).and_then(|v| v.trim().parse::<f64>().ok());
        let Some(xv) = parse(xi) else { continue };
        for (s, (_, i)) in series.iter_mut().zip(&ys) {
            if let Some(yv) = parse(*i) {
                s.points.push((xv, yv));
            }
        }
    }
    let spec = PlotSpec {
        title: title.unwrap_or_else(|| input.display().to_string()),
        x_label: x.to_string(),
        y_label: y.to_string(),
        log_x: logx,
        log_y: logy,
        series,
        slopes: match slope {
            Some(t) => parse_list(&t)?,
            None => Vec::new(),
        },
    };
    let svg = render(&spec)?;
    std::fs::write(output, svg).map_err(|e| CliError::Config(format!("cannot write {}: {e}", output.display())))?;
    Ok(())
}

//! Acceptance suite: the six exactness criteria and the seven statistical
//! gates, one PASS/FAIL line each.
//!
//! Seeds are fixed in advance as `2026 + criterion`. The process exits
//! nonzero only when an exactness criterion (1-6) fails; statistical gates
//! are reported as measured. `CC_ACCEPTANCE_ONLY=7,9` restricts the run.

use std::f64::consts::FRAC_PI_4;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use cc_core::experiments::{
    clean_decay, default_q_grid, run_circulation, run_conductance, run_decay, run_monotype, run_multifractal, run_zz,
    CirculationRun, ConductanceRun, DecayRun, MonotypeRun, MultifractalRun, ZzRun,
};
use cc_core::validation::{
    check_bloch, check_fock, check_homology, check_kirchhoff, check_unitarity, check_z4, CheckResult, ValidationOptions,
};
use cc_core::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn seed(criterion: u64) -> u64 {
    2026 + criterion
}

fn exact(checks: Vec<CheckResult>) -> Outcome {
    Outcome {
        passed: checks.iter().all(|c| c.passed),
        detail: checks
            .iter()
            .map(|c| format!("{} {:.2e} (tol {:.0e})", c.name, c.value, c.tolerance))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn c1() -> Result<Outcome> {
    Ok(exact(check_unitarity(&ValidationOptions::default())?))
}

fn c2() -> Result<Outcome> {
    Ok(exact(check_z4(&ValidationOptions::default())?))
}

fn c3() -> Result<Outcome> {
    Ok(exact(check_bloch(&ValidationOptions::default())?))
}

fn c4() -> Result<Outcome> {
    Ok(exact(check_kirchhoff(&ValidationOptions::default())?))
}

fn c5() -> Result<Outcome> {
    Ok(exact(check_homology(&ValidationOptions::default())?))
}

fn c6() -> Result<Outcome> {
    Ok(exact(check_fock(&ValidationOptions::default())?))
}

fn c7() -> Result<Outcome> {
    let s = run_monotype(&MonotypeRun {
        l: 8,
        mu: -1.0 / 16.0,
        seed: seed(7),
        samples: 10_000,
    })?;
    Ok(Outcome {
        passed: s.worst_z < 4.0,
        detail: format!(
            "max |E G - delta|/stderr = {:.2} at {} over G and G^2 on all links, {} samples",
            s.worst_z, s.worst_key, s.samples
        ),
    })
}

fn c8() -> Result<Outcome> {
    let f = clean_decay(64, 2.0, 16.0)?;
    Ok(Outcome {
        passed: (f.exponent + 2.0).abs() < 0.2,
        detail: format!("slope {:.4} on r in [2, 16], L = 64, twist (pi, pi)", f.exponent),
    })
}

fn c9() -> Result<Outcome> {
    let l = 32;
    let run = ZzRun {
        l,
        beta: FRAC_PI_4,
        mu: -1.0 / (8.0 * l as f64),
        seed: seed(9),
        samples: 10_000,
        box_size: 16,
        r_min: 2.0,
        r_max: 8.0,
        resamples: 200,
    };
    let out = run_zz(&run, None)?;
    let e = out.estimate?;
    let (r, ri, rr) = (e.ratio.ratio, e.ratio_im_err, e.ratio_re_err);
    let exponent_ok = (e.level.exponent + 2.0).abs() < 0.3;
    let ratio_ok = r.re < 0.0 && r.im.abs() < 2.0 * ri;
    Ok(Outcome {
        passed: exponent_ok && ratio_ok,
        detail: format!(
            "exponent {:.3} +- {:.3} (gate -2 +- 0.3: {}); n_hat {:.4} +- {:.4} (predicted 4); \
             Sigma/Upsilon {:.3}{:+.3}i +- ({:.3}, {:.3}) (predicted -4; gate negative and real: {}); \
             raw-Upsilon ratio {:.3}{:+.3}i; {} samples, mu = {:.5}",
            e.level.exponent,
            e.exponent_err,
            pass_word(exponent_ok),
            e.level.n_hat,
            e.n_hat_err,
            r.re,
            r.im,
            rr,
            ri,
            pass_word(ratio_ok),
            e.ratio_raw.ratio.re,
            e.ratio_raw.ratio.im,
            e.samples,
            run.mu
        ),
    })
}

fn c10() -> Result<Outcome> {
    let run = MultifractalRun {
        l: 64,
        beta: FRAC_PI_4,
        seed: seed(10),
        samples: 3000,
        q: default_q_grid(),
        r_min: 2.0,
        r_max: 16.0,
        resamples: 200,
        contact: None,
    };
    let f = run_multifractal(&run, None)?.fit?;
    let x_ok = (0.20..=0.32).contains(&f.x);
    let weyl_ok = f.weyl.iter().all(|&(_, d, e)| d.abs() < 2.0 * e);
    let weyl: Vec<String> = f.weyl.iter().map(|(q, d, e)| format!("q={q}: {d:+.4} +- {e:.4}")).collect();
    Ok(Outcome {
        passed: x_ok && weyl_ok,
        detail: format!(
            "X = {:.4} +- {:.4} (gate [0.20, 0.32]: {}); Weyl Delta_q - Delta_1-q [{}] (gate 2 sigma: {}); {} states",
            f.x,
            f.x_err,
            pass_word(x_ok),
            weyl.join(", "),
            pass_word(weyl_ok),
            f.samples
        ),
    })
}

fn c11() -> Result<Outcome> {
    let g = |l| {
        run_conductance(
            &ConductanceRun {
                l,
                beta: FRAC_PI_4,
                seed: seed(11),
                samples: 2000,
            },
            None,
        )
    };
    let (a, b) = (g(16)?, g(32)?);
    let bracket = |m: f64| (0.50..=0.62).contains(&m);
    let trend = b.mean - a.mean > 2.0 * a.stderr.hypot(b.stderr);
    Ok(Outcome {
        passed: bracket(a.mean) && bracket(b.mean) && trend,
        detail: format!(
            "<G>(16) = {:.4} +- {:.4}, <G>(32) = {:.4} +- {:.4} (bracket [0.50, 0.62]: {}/{}; trend at 2 sigma: {})",
            a.mean,
            a.stderr,
            b.mean,
            b.stderr,
            pass_word(bracket(a.mean)),
            pass_word(bracket(b.mean)),
            pass_word(trend)
        ),
    })
}

fn c12() -> Result<Outcome> {
    let sides = vec![2, 3, 4, 5, 6];
    let run = |beta| {
        run_circulation(
            &CirculationRun {
                l: 16,
                beta,
                seed: seed(12),
                samples: 10_000,
                sides: sides.clone(),
                contact: None,
            },
            None,
        )
    };
    let crit = run(FRAC_PI_4)?;
    let lo = run(FRAC_PI_4 - 0.15)?;
    let hi = run(FRAC_PI_4 + 0.15)?;
    let worst = crit.iter().map(|s| s.normalized).fold(0.0, f64::max);
    let crit_ok = worst < 0.1;
    let z = |s: &cc_core::experiments::CirculationSummary| s.mean / s.stderr;
    let flip = lo.iter().zip(&hi).any(|(a, b)| (z(a) > 2.0 && z(b) < -2.0) || (z(a) < -2.0 && z(b) > 2.0));
    let per_side: Vec<String> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| format!("m={}: {:+.2} / {:+.2} sigma", a.side, z(a), z(b)))
        .collect();
    Ok(Outcome {
        passed: crit_ok && flip,
        detail: format!(
            "critical max |E circ|/E|circ| = {:.4} (gate < 0.1: {}); off-critical E circ / stderr at beta = pi/4 -+ 0.15 [{}] (sign flip at 2 sigma: {})",
            worst,
            pass_word(crit_ok),
            per_side.join(", "),
            pass_word(flip)
        ),
    })
}

fn c13() -> Result<Outcome> {
    let l = 32;
    let run = |db: f64| {
        run_decay(
            &DecayRun {
                l,
                beta: FRAC_PI_4 + db,
                mu: -1.0 / (8.0 * l as f64),
                seed: seed(13),
                samples: 1000,
                r_min: 2,
                r_max: 12,
                resamples: 200,
            },
            None,
        )
    };
    let mut fits = Vec::new();
    for db in [-0.25, -0.15, 0.0, 0.15, 0.25] {
        fits.push((db, run(db)?));
    }
    let get = |db: f64| fits.iter().find(|f| f.0 == db).unwrap().1;
    let five_sigma = [-0.15, 0.15].iter().all(|&db| get(db).slope / get(db).slope_err < -5.0);
    let ordered = get(-0.25).slope < get(-0.15).slope && get(0.25).slope < get(0.15).slope;
    let text: Vec<String> = fits
        .iter()
        .map(|(db, f)| format!("{db:+.2}: {:.4} +- {:.4}", f.slope, f.slope_err))
        .collect();
    Ok(Outcome {
        passed: five_sigma && ordered,
        detail: format!(
            "d ln E(sigma)/dr by beta - pi/4 [{}] (negative at 5 sigma at -+0.15: {}; steeper at -+0.25: {}); critical row shown for reference",
            text.join(", "),
            pass_word(five_sigma),
            pass_word(ordered)
        ),
    })
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

type Criterion = (u64, &'static str, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 13] = [
    (1, "U_s unitarity and class structure", c1),
    (2, "Z4 quadruplets", c2),
    (3, "Bloch oracle", c3),
    (4, "Kirchhoff double rule", c4),
    (5, "homology invariance of G(C1,C2)", c5),
    (6, "Fock identities", c6),
    (7, "mono-type triviality", c7),
    (8, "clean first-moment decay", c8),
    (9, "critical Sigma_zz power law", c9),
    (10, "multifractal parabola", c10),
    (11, "mean conductance", c11),
    (12, "circulation and parity", c12),
    (13, "off-critical localization", c13),
];

fn selected() -> Option<Vec<u64>> {
    let v = std::env::var("CC_ACCEPTANCE_ONLY").ok()?;
    Some(v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let only = selected();
    let mut passed = 0;
    let mut ran = 0;
    let mut exact_failed = false;
    for (id, name, f) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Outcome {
                passed: false,
                detail: format!("error: {e}"),
            },
            Err(_) => Outcome {
                passed: false,
                detail: "panicked".into(),
            },
        };
        if outcome.passed {
            passed += 1;
        } else if id <= 6 {
            exact_failed = true;
        }
        println!(
            "criterion {id:>2} {}: {name} ({:.1}s) | {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {passed}/{ran} criteria passed");
    if exact_failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use galbrun_core::config::{parse_config_with, RunConfig};
use galbrun_core::convergence::{convergence_study, ConvergenceTable, Monitor};
use galbrun_core::opcheck::{lie_residuals, random_ibp, random_subspaces};
use galbrun_core::operators::Order;
use galbrun_core::particles::validate_particles;
use galbrun_core::run::{simulate, Setup, SimOptions};
use galbrun_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, out: &Path, sets: &[&str]) -> Result<RunConfig> {
    let text = fs::read_to_string(configs().join(name)).expect("shipped config");
    let mut all = vec![format!("output.dir={}", out.display())];
    all.extend(sets.iter().map(|s| s.to_string()));
    parse_config_with(&text, &all)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn fmt_orders(t: &ConvergenceTable, m: Monitor) -> String {
    let s = t.series(m).expect("monitor in study");
    let o: Vec<String> = s
        .orders
        .iter()
        .map(|o| o.map_or("exact".into(), |v| format!("{v:.3}")))
        .collect();
    format!("{} orders [{}]", m.name(), o.join(", "))
}

/// Finest-pair order at least `nominal - 0.2`, or both errors at the roundoff floor.
fn order_ok(t: &ConvergenceTable, m: Monitor, nominal: f64) -> bool {
    let s = t.series(m).expect("monitor in study");
    match s.orders.last() {
        Some(None) => true,
        Some(Some(o)) => *o >= nominal - 0.2,
        None => false,
    }
}

struct Studies {
    quiescent: ConvergenceTable,
    shear: ConvergenceTable,
}

fn studies(tmp: &Path) -> Result<Studies> {
    let all = "convergence.monitors=h_drift,galbrun_form_diff,galbrun_primary,energy_residual";
    let q = load("convergence_standing_wave.conf", tmp, &["time.horizon=2", all])?;
    let s = load("convergence_shear.conf", tmp, &[all])?;
    Ok(Studies {
        quiescent: convergence_study(&q)?,
        shear: convergence_study(&s)?,
    })
}

fn c1_standing_wave(tmp: &Path) -> Result<Verdict> {
    let cfg = load(
        "convergence_standing_wave.conf",
        tmp,
        &["grid.p=2", "convergence.monitors=solution_error"],
    )?;
    let t = convergence_study(&cfg)?;
    let s = t.series(Monitor::SolutionError).unwrap();
    let within = s
        .orders
        .iter()
        .all(|o| matches!(o, Some(v) if (v - 2.0).abs() <= 0.2));
    let k = t.levels.iter().position(|l| (l.nx, l.ny) == (128, 65)).unwrap();
    let e128 = s.errors[k];
    verdict(
        within && e128 <= 1e-2,
        format!(
            "{}, error at 128x65 = {e128:.3e}",
            fmt_orders(&t, Monitor::SolutionError)
        ),
    )
}

fn c2_no_resonance(tmp: &Path, st: &Studies) -> Result<Verdict> {
    let mut ratios = Vec::new();
    for name in ["standing_wave.conf", "shear_admittance.conf"] {
        let cfg = load(
            name,
            tmp,
            &["time.horizon=0.05", "checks.enforce=", "output.snapshot_times="],
        )?;
        ratios.push(
            simulate(&cfg, &SimOptions::default(), |_, _| Ok(()))?
                .stats
                .h_ratio,
        );
    }
    let h_ok = ratios.iter().all(|&r| r <= 1e-9);
    let q = order_ok(&st.quiescent, Monitor::HDrift, 2.0);
    let s = order_ok(&st.shear, Monitor::HDrift, 2.0);
    verdict(
        h_ok && q && s,
        format!(
            "h_I ratios {:.2e}/{:.2e}; quiescent {}; shear {}",
            ratios[0],
            ratios[1],
            fmt_orders(&st.quiescent, Monitor::HDrift),
            fmt_orders(&st.shear, Monitor::HDrift)
        ),
    )
}

fn c3_formulations(st: &Studies) -> Result<Verdict> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, t) in [("quiescent", &st.quiescent), ("shear", &st.shear)] {
        for m in [Monitor::GalbrunFormDiff, Monitor::GalbrunPrimary] {
            pass &= order_ok(t, m, 2.0);
            detail.push(format!("{label} {}", fmt_orders(t, m)));
        }
    }
    verdict(pass, detail.join("; "))
}

fn c4_energy_balance(st: &Studies) -> Result<Verdict> {
    verdict(
        order_ok(&st.shear, Monitor::EnergyResidual, 2.0),
        format!("shear {}", fmt_orders(&st.shear, Monitor::EnergyResidual)),
    )
}

fn c5_mild_bound(tmp: &Path) -> Result<Verdict> {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in [
        "standing_wave.conf",
        "shear_admittance.conf",
        "quiescent_dissipative.conf",
        "uniform_axial.conf",
    ] {
        let cfg = load(name, tmp, &["checks.enforce=mild_bound"])?;
        let out = simulate(&cfg, &SimOptions::default(), |_, _| Ok(()))?;
        let slack = out.stats.min_mild_slack;
        pass &= out.records.iter().all(|r| r.mild_slack >= -0.05);
        detail.push(format!("{name} min slack {slack:.3e}"));
    }
    // λ0 = 0 exactly for uniform backgrounds, max|U'|/2 for the shear
    for name in ["standing_wave.conf", "uniform_axial.conf"] {
        let cfg = load(name, tmp, &[])?;
        let l = Setup::new(&cfg)?.constants(&cfg)?.lambda0;
        pass &= l == 0.0;
        detail.push(format!("{name} lambda0 {l:e}"));
    }
    let cfg = load("shear_admittance.conf", tmp, &[])?;
    let l = Setup::new(&cfg)?.constants(&cfg)?.lambda0;
    // U = M c tanh((y - Ly/2)/δ) peaks in slope at the centre node: M c / δ
    let exact = 0.3 * 1.0 / 0.2 / 2.0;
    pass &= (l - exact).abs() <= 1e-3;
    detail.push(format!("shear lambda0 {l:.6} vs {exact:.6}"));
    verdict(pass, detail.join("; "))
}

fn c6_galbrun_bound(tmp: &Path) -> Result<Verdict> {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in [
        "quiescent_dissipative.conf",
        "shear_admittance.conf",
        "shear_g_forced.conf",
    ] {
        let cfg = load(name, tmp, &["checks.enforce=galbrun_bound"])?;
        let k = Setup::new(&cfg)?.constants(&cfg)?;
        // C = ρ̄0/ρ̲0 and ν = (2/τ0) max{1 + τ0 max|∇u0|, τ0 max|c0⁻¹D0c0|}
        let (ra, grad) = if name.starts_with("shear") {
            (0.1, 0.3 / 0.2)
        } else {
            (0.0, 0.0)
        };
        let c_exact = (1.0 + ra) / (1.0 - ra);
        let nu_exact = 2.0 / cfg.tau0 * (1.0 + cfg.tau0 * grad);
        let consts_ok = (k.c - c_exact).abs() <= 1e-12 && (k.nu - nu_exact).abs() <= 1e-9 && k.a == 1.0;
        let out = simulate(&cfg, &SimOptions::default(), |_, _| Ok(()))?;
        let ok = out.records.iter().all(|r| r.galbrun_slack >= -0.05);
        pass &= ok && consts_ok;
        detail.push(format!(
            "{name} min slack {:.3e} (C {:.4}, nu {:.4})",
            out.stats.min_galbrun_slack, k.c, k.nu
        ));
    }
    verdict(pass, detail.join("; "))
}

fn c7_subspaces() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for rho0c0 in [1.0, 0.37, 4.2] {
        let (w, n) = random_subspaces(rho0c0, 100, &mut rng)?;
        worst = worst.max(w);
        count += n;
    }
    verdict(
        worst <= 1e-13,
        format!("max {worst:.3e} x rho0c0 over {count} samples"),
    )
}

fn c8_ibp(tmp: &Path) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for p in ["2", "4"] {
        for size in [("32", "33"), ("64", "17")] {
            let cfg = load(
                "operators.conf",
                tmp,
                &[
                    &format!("grid.p={p}"),
                    &format!("grid.nx={}", size.0),
                    &format!("grid.ny={}", size.1),
                ],
            )?;
            let setup = Setup::new(&cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            worst = worst.max(random_ibp(&setup.bg, &setup.op, 50, &mut rng)?);
        }
    }
    verdict(worst <= 1e-12, format!("max relative residual {worst:.3e}"))
}

fn c9_lie() -> Result<Verdict> {
    let mut pass = true;
    let mut detail = Vec::new();
    for order in [Order::Second, Order::Fourth] {
        let (a, b) = lie_residuals(64, 65, 1.0, 1.0, order)?;
        let (c, d) = lie_residuals(128, 129, 1.0, 1.0, order)?;
        let (o1, o2) = ((a / c).log2(), (b / d).log2());
        let target = order.p() as f64 - 0.2;
        pass &= o1 >= target && o2 >= target;
        detail.push(format!("p={}: {o1:.3}, {o2:.3}", order.p()));
    }
    verdict(pass, detail.join("; "))
}

fn c10_particles(tmp: &Path) -> Result<Verdict> {
    let cfg = load("particles.conf", tmp, &["particles.epsilons=1e-2,5e-3"])?;
    let r = validate_particles(&cfg, 256 << 20)?;
    verdict(
        r.ratios_within(1.7, 2.3),
        format!(
            "errors {:.3e}, {:.3e}; ratio {:.4}",
            r.errors[0], r.errors[1], r.ratios[0]
        ),
    )
}

fn c11_dissipativity(tmp: &Path) -> Result<Verdict> {
    let cfg = load(
        "quiescent_dissipative.conf",
        tmp,
        &["checks.enforce=dissipativity", "output.cadence=1"],
    )?;
    let out = simulate(&cfg, &SimOptions::default(), |_, _| Ok(()))?;
    let e0 = out.records[0].e_acoustic;
    let mut worst = f64::NEG_INFINITY;
    for w in out.records.windows(2) {
        worst = worst.max(w[1].e_acoustic - w[0].e_acoustic);
    }
    verdict(
        e0 > 0.0 && worst <= 1e-12 * e0,
        format!(
            "max step increase {:.3e} x E0 over {} records",
            worst / e0,
            out.records.len()
        ),
    )
}

fn c12_determinism(tmp: &Path) -> Result<Verdict> {
    let bin = env!("CARGO_BIN_EXE_galbrun");
    let mut csvs = Vec::new();
    for k in 0..2 {
        let dir = tmp.join(format!("det_{k}"));
        let status = Command::new(bin)
            .args(["run", "--config"])
            .arg(configs().join("shear_admittance.conf"))
            .args(["--set", &format!("output.dir={}", dir.display())])
            .args([
                "--set",
                "grid.nx=64",
                "--set",
                "grid.ny=33",
                "--set",
                "time.horizon=0.5",
            ])
            .output()
            .expect("run galbrun");
        csvs.push((
            status.status.code(),
            fs::read(dir.join("monitor.csv")).unwrap_or_default(),
        ));
    }
    let same = csvs[0].1 == csvs[1].1 && !csvs[0].1.is_empty();
    verdict(
        same && csvs[0].0 == Some(0) && csvs[1].0 == Some(0),
        format!("{} bytes, identical = {same}", csvs[0].1.len()),
    )
}

fn main() {
    let tmp = TempDir::new().expect("temp dir");
    let t = tmp.path();
    let started = Instant::now();
    let st = studies(t);
    let criteria: Vec<(&str, Box<dyn Fn() -> Result<Verdict> + '_>)> = vec![
        ("standing_wave_oracle", Box::new(|| c1_standing_wave(t))),
        (
            "no_resonance",
            Box::new(|| st.as_ref().map_err(clone_err).and_then(|s| c2_no_resonance(t, s))),
        ),
        (
            "formulation_equivalence",
            Box::new(|| st.as_ref().map_err(clone_err).and_then(c3_formulations)),
        ),
        (
            "energy_balance",
            Box::new(|| st.as_ref().map_err(clone_err).and_then(c4_energy_balance)),
        ),
        ("mild_bound", Box::new(|| c5_mild_bound(t))),
        ("galbrun_bound", Box::new(|| c6_galbrun_bound(t))),
        ("boundary_subspaces", Box::new(c7_subspaces)),
        ("integration_by_parts", Box::new(|| c8_ibp(t))),
        ("lie_identities", Box::new(c9_lie)),
        ("particle_paths", Box::new(|| c10_particles(t))),
        ("dissipativity", Box::new(|| c11_dissipativity(t))),
        ("determinism", Box::new(|| c12_determinism(t))),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = match f() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {name}: {} ({detail})",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} of {} criteria passed in {:.0}s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn clone_err(e: &galbrun_core::Error) -> galbrun_core::Error {
    galbrun_core::Error::InvalidArgument(e.to_string())
}

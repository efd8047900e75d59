//! Acceptance gate. Each criterion prints one PASS or FAIL line with its
//! measured figures and wall time; any failure or blown time budget makes
//! the target exit nonzero.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hfss_cli::config::LoadedConfig;
use hfss_core::channel::ChannelState;
use hfss_core::estimator::{estimate_exact, estimate_granularity_interval, ProbeRecord};
use hfss_core::pr_link::{PolicyKind, PowerPolicy, PrLink, RateFunction};
use hfss_core::protocol::{verify_coverage, TimingConfig};
use hfss_core::sensing::{q_function, PrObservation};
use hfss_core::sim::{linspace, policy_curve, run_full, run_noise_calibration, ProbeOutcome};
use hfss_core::supervised::{
    central_difference, check_monotonicity, cr_rate, feedback_sinr_ratio, power_penalty_tci,
};
use hfss_core::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    check: fn() -> Check,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(bundled(name)).unwrap();
    let loaded = LoadedConfig::parse(&text).unwrap();
    let mut sc = loaded.scenario;
    sc.seed = loaded.seed.unwrap_or(1);
    sc
}

fn unit() -> ChannelState<f64> {
    ChannelState {
        h_cp: 1.0,
        h_pc: 1.0,
        ..ChannelState::reference()
    }
}

fn observe(link: &PrLink<f64>, ch: &ChannelState<f64>, p_c: f64) -> ProbeRecord<f64> {
    let (a, b) = (link.respond(ch, 0.0), link.respond(ch, p_c));
    ProbeRecord::new(
        PrObservation::new(ch.h_pc_tilde * a.p_p, a.r_p),
        PrObservation::new(ch.h_pc_tilde * b.p_p, b.r_p),
        p_c,
    )
}

fn round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for kind in [PolicyKind::Cp, PolicyKind::Tci, PolicyKind::Wf] {
        let policy = match kind {
            PolicyKind::Cp => PowerPolicy::ConstantPower { q: 100.0 },
            PolicyKind::Tci => PowerPolicy::TruncatedInversion {
                snr_target: 10.0,
                gamma_threshold: 0.1,
            },
            PolicyKind::Wf => PowerPolicy::WaterFilling { mu: 4.0 },
        };
        let link = PrLink::new(policy, RateFunction::continuous(2.0));
        let mut accepted = 0;
        while accepted < 100 {
            let sigma_p2 = rng.random_range(0.2..3.0);
            let truth = rng.random_range(0.01..5.0);
            let ch = ChannelState {
                h_cp: truth * sigma_p2,
                sigma_p2,
                ..ChannelState::reference()
            };
            let p_c = rng.random_range(0.05..50.0);
            let rec = observe(&link, &ch, p_c);
            if !(rec.before.q > 0.0 && rec.after.q > 0.0) {
                continue;
            }
            let est = estimate_exact(&rec, &link.rate_fn).map_err(|e| format!("{kind}: {e}"))?;
            let got = est
                .point()
                .ok_or_else(|| format!("{kind}: not a point estimate"))?;
            let rel = (got - truth).abs() / truth;
            ensure(rel <= 1e-9, || {
                format!("{kind}: h/sigma={truth} p_c={p_c} got {got} (rel {rel:e})")
            })?;
            worst = worst.max(rel);
            accepted += 1;
            n += 1;
        }
    }
    Ok(format!("{n} pairs, max relative error {worst:.2e}"))
}

fn case_one() -> Check {
    let sc = scenario("case1.cfg");
    let res = run_full(&sc).map_err(|e| e.to_string())?;
    let truth = sc.channel.normalized_cross_gain();
    let r0 = sc.link.respond(&sc.channel, 0.0).r_p;
    let mut last = (r0, f64::INFINITY);
    for lp in &res.learning {
        let ProbeOutcome::Estimate(e) = &lp.outcome else {
            return Err(format!("p_c={}: no estimate", lp.p_c));
        };
        ensure(e.contains(truth), || {
            format!("p_c={}: [{}, {}] misses {truth}", lp.p_c, e.lower, e.upper)
        })?;
        if lp.record.after.r < last.0 {
            ensure(e.width() <= last.1, || {
                format!("p_c={}: width grew at a rate drop", lp.p_c)
            })?;
            last = (lp.record.after.r, e.width());
        }
    }
    let hand = ProbeRecord::new(
        PrObservation::new(100.0, 5.0),
        PrObservation::new(100.0, 4.0),
        10.0,
    );
    let upper = estimate_granularity_interval(&hand, &sc.link.rate_fn)
        .map_err(|e| e.to_string())?
        .upper;
    ensure((upper - 0.32).abs() <= 1e-12, || {
        format!("hand interval upper {upper}, want 0.32")
    })?;
    let planned = res.planning.as_ref().ok_or("no planning estimate")?;
    ensure(planned.p_c == 10.0, || {
        format!("planned from p_c={}", planned.p_c)
    })?;
    ensure(res.transmission.len() == 100, || {
        "data sweep is not 1..100".into()
    })?;
    for tp in &res.transmission {
        let actual = tp.penalty_actual.ok_or("missing actual loss")?;
        ensure(tp.penalty_predicted >= actual, || {
            format!(
                "p_c_d={}: bound {} < loss {actual}",
                tp.p_c_d, tp.penalty_predicted
            )
        })?;
    }
    let r51 = cr_rate(&sc.channel, &sc.link, sc.gamma_gap_c, 51.0);
    ensure(r51 == 1.0, || format!("r_c(51) = {r51}"))?;
    Ok(format!(
        "{} probes contain {truth}, hand upper {upper}, bound holds on 100 data powers, r_c(51) = {r51}",
        res.learning.len()
    ))
}

fn case_two() -> Check {
    let sc = scenario("case2.cfg");
    let trials = sc.trials.max(1000);
    let rep = run_noise_calibration(&sc, 10.0, trials).map_err(|e| e.to_string())?;
    let n = rep.evaluated() as f64;
    ensure(n >= 1000.0, || format!("only {n} evaluated trials"))?;
    let p = q_function(sc.sensing.ok_or("no sensing")?.zeta);
    let limit = p + 3.0 * (p * (1.0 - p) / n).sqrt();
    let (lo, hi) = (rep.lower_violation_rate(), rep.upper_violation_rate());
    ensure(lo <= limit && hi <= limit, || {
        format!("violation rates {lo}, {hi} exceed {limit}")
    })?;
    let pen = power_penalty_tci(0.5, 2.0, sc.link.outage_threshold(&sc.channel))
        .map_err(|e| e.to_string())?;
    ensure((pen - 3.0103).abs() <= 1e-6 * 3.0103 + 5e-6, || {
        format!("penalty {pen} dB")
    })?;
    ensure((pen - 10.0 * 2f64.log10()).abs() <= 1e-12, || {
        format!("penalty {pen} is not 10 log10 2")
    })?;
    let r10 = cr_rate(&sc.channel, &sc.link, sc.gamma_gap_c, 10.0);
    let want = (41.0f64 / 31.0).log2();
    ensure((r10 - want).abs() <= 1e-9, || {
        format!("r_c(10) = {r10}, want {want}")
    })?;
    Ok(format!(
        "{trials} trials: miss rates {lo:.4} / {hi:.4} <= {limit:.4}; penalty(2) = {pen:.6} dB; r_c(10) = {r10:.12}"
    ))
}

fn monotonicity() -> Check {
    let ch = ChannelState::<f64>::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let links = [
        PrLink::new(
            PowerPolicy::ConstantPower { q: 100.0 },
            RateFunction::shannon(),
        ),
        PrLink::new(
            PowerPolicy::TruncatedInversion {
                snr_target: 10.0,
                gamma_threshold: 0.1,
            },
            RateFunction::shannon(),
        ),
        PrLink::new(
            PowerPolicy::WaterFilling { mu: 20.0 },
            RateFunction::shannon(),
        ),
    ];
    for link in &links {
        let kind = link.policy.kind();
        let grid = linspace(0.0, 100.0, 9_999);
        let rep = check_monotonicity(&ch, link, 1.0, &grid).map_err(|e| e.to_string())?;
        ensure(rep.points == 10_000 && rep.is_monotone(), || {
            format!("{kind}: {:?}", rep.first_violation)
        })?;
        for _ in 0..100 {
            let p = rng.random_range(0.1..100.0);
            let slope = central_difference(|x| feedback_sinr_ratio(&ch, link, x), p, 1e-6);
            ensure(slope > 0.0, || format!("{kind}: F slope {slope} at {p}"))?;
        }
    }
    Ok("3 policies x 10^4 grid points increasing; 300 positive F slopes".into())
}

fn timing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut accepted = 0;
    while accepted < 10_000 {
        let tau_max = 10f64.powf(rng.random_range(-7.0..-2.0));
        let d = |r: &mut ChaCha8Rng| r.random_range(0.0..=tau_max);
        let (tau_p, tau_pc, tau_cp) = (d(&mut rng), d(&mut rng), d(&mut rng));
        if tau_p > tau_pc + tau_cp {
            continue;
        }
        let t_p = 10f64.powf(rng.random_range(-6.0..-1.0));
        let cfg =
            TimingConfig::new(tau_p, tau_pc, tau_cp, tau_max, t_p).map_err(|e| e.to_string())?;
        ensure(verify_coverage(&cfg), || format!("not covered: {cfg:?}"))?;
        accepted += 1;
    }
    Ok(format!("{accepted} random delay configurations covered"))
}

fn shapes() -> Check {
    let ch = unit();
    let step = 0.01;
    let grid = linspace(0.0, 10.0, 1000);
    let diffs = |xs: &[(f64, f64)]| {
        xs.windows(2)
            .map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1))
            .collect::<Vec<_>>()
    };

    let cp = PrLink::new(
        PowerPolicy::ConstantPower { q: 100.0 },
        RateFunction::shannon(),
    );
    let c = policy_curve(&cp, &ch, &grid);
    let pr: Vec<_> = c.iter().map(|(_, s)| (s.p_p, s.r_p)).collect();
    ensure(
        diffs(&pr).iter().all(|&(dp, dr)| dp == 0.0 && dr < 0.0),
        || "cp shape".into(),
    )?;

    let tci = PrLink::new(
        PowerPolicy::TruncatedInversion {
            snr_target: 10.0,
            gamma_threshold: 0.5,
        },
        RateFunction::shannon(),
    );
    let cliff_t = (ch.h_p / 0.5 - ch.sigma_p2) / ch.h_cp;
    check_cliffed(&policy_curve(&tci, &ch, &grid), cliff_t, step, |dp, dr| {
        dp > 0.0 && dr.abs() < 1e-12
    })
    .map_err(|e| format!("tci: {e}"))?;

    let mu = 4.0;
    let wf = PrLink::new(PowerPolicy::WaterFilling { mu }, RateFunction::shannon());
    let cliff_w = (mu * ch.h_p - ch.sigma_p2) / ch.h_cp;
    check_cliffed(&policy_curve(&wf, &ch, &grid), cliff_w, step, |dp, dr| {
        dp < 0.0 && dr < 0.0
    })
    .map_err(|e| format!("wf: {e}"))?;

    let o = Command::new(env!("CARGO_BIN_EXE_hfss"))
        .args([
            "policies", "--policy", "wf", "--mu", "4", "--sweep", "0:8:0.01",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&o.stdout);
    let zero = text
        .lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .map(|x| x.parse::<f64>().unwrap())
                .collect::<Vec<_>>()
        })
        .find(|v| v[2] == 0.0)
        .map(|v| v[0])
        .ok_or("cli curve never reaches zero rate")?;
    ensure((zero - 6.0).abs() <= step + 1e-12, || {
        format!("cli wf cliff at {zero}")
    })?;
    Ok(format!(
        "cp flat/decreasing; tci cliff {cliff_t}; wf cliff {cliff_w} (cli {zero})"
    ))
}

/// Before the cliff every step satisfies `live`; from it on the PR is silent.
fn check_cliffed(
    curve: &[(f64, hfss_core::PrState<f64>)],
    cliff: f64,
    step: f64,
    live: impl Fn(f64, f64) -> bool,
) -> Result<(), String> {
    let first_zero = curve
        .iter()
        .find(|(_, s)| s.r_p == 0.0)
        .map(|(p, _)| *p)
        .ok_or("no cliff")?;
    ensure((first_zero - cliff).abs() <= step + 1e-12, || {
        format!("cliff at {first_zero}, want {cliff}")
    })?;
    for w in curve.windows(2) {
        let ((p0, a), (p1, b)) = (w[0], w[1]);
        if p1 < cliff {
            ensure(live(b.p_p - a.p_p, b.r_p - a.r_p), || {
                format!("shape broken between {p0} and {p1}")
            })?;
        } else if p0 >= cliff {
            ensure(b.p_p == 0.0 && b.r_p == 0.0, || {
                format!("PR active after cliff at {p1}")
            })?;
        }
    }
    Ok(())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let st = Command::new(env!("CARGO_BIN_EXE_hfss"))
            .args([
                "run",
                bundled("case2.cfg").to_str().unwrap(),
                "--seed",
                "7",
                "--out",
            ])
            .arg(&out)
            .env_remove("HFSS_SEED")
            .status()
            .map_err(|e| e.to_string())?;
        ensure(st.success(), || format!("run {i} exited with {st}"))?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "CSV outputs differ".into())?;
    Ok(format!("two runs, {} identical bytes", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "exact estimator round trip",
            budget: Duration::from_secs(1),
            check: round_trip,
        },
        Criterion {
            id: 2,
            name: "case I granularity and rate bound",
            budget: Duration::from_secs(5),
            check: case_one,
        },
        Criterion {
            id: 3,
            name: "case II noise calibration and power penalty",
            budget: Duration::from_secs(60),
            check: case_two,
        },
        Criterion {
            id: 4,
            name: "CR rate monotonicity",
            budget: Duration::from_secs(2),
            check: monotonicity,
        },
        Criterion {
            id: 5,
            name: "timing coverage",
            budget: Duration::from_secs(1),
            check: timing,
        },
        Criterion {
            id: 6,
            name: "PR policy shapes",
            budget: Duration::from_secs(1),
            check: shapes,
        },
        Criterion {
            id: 7,
            name: "seeded run determinism",
            budget: Duration::from_secs(60),
            check: determinism,
        },
    ];
    let mut failed = 0;
    for Criterion {
        id,
        name,
        budget,
        check,
    } in criteria
    {
        let t = Instant::now();
        let result = check();
        let dt = t.elapsed();
        let (ok, detail) = match result {
            Ok(d) if dt <= budget => (true, d),
            Ok(d) => (false, format!("{d}; took {dt:.2?}, budget {budget:.0?}")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {id} {}: {name}: {detail} [{:.3}s]",
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64()
        );
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

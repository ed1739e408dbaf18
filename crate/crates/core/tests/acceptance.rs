//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Set `COGRELAY_ACCEPTANCE_ONLY=1,3` to run a subset.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use cogrelay_core::experiment::config::{ExperimentConfig, Mode};
use cogrelay_core::experiment::oracle::run_oracle;
use cogrelay_core::experiment::sweep::{aggregate, run_sweep, write_sweep_csv, GroupKey, Stats, SweepRow};
use cogrelay_core::experiment::MetricsRecord;
use cogrelay_core::rl::{
    quantize_level, reward, train, write_qtable, LevelScheme, RewardContext, RewardParams, TrainSetup,
};
use cogrelay_core::simcore::{
    service_indicators, step, Action, ActionMask, EnvStreams, ModelParams, NetworkState, PerLink, PerQueue, QueueState,
};
use cogrelay_core::stochastic::{ChannelParams, ChannelState, MmbpParams, RngStream};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Sweep shared by criteria 1 and 2: the default configuration.
fn default_sweep() -> Vec<SweepRow> {
    let config = ExperimentConfig::default();
    let result = run_sweep(&config, None);
    assert!(result.failures.is_empty(), "sweep cells failed: {:?}", result.failures);
    result.rows
}

fn stats_by(rows: &[SweepRow], metric: fn(&MetricsRecord) -> f64) -> BTreeMap<GroupKey, Stats> {
    aggregate(rows, metric)
}

/// Two-sample standard error of a difference of means.
fn se_diff(a: &Stats, b: &Stats) -> f64 {
    (a.std_err.powi(2) + b.std_err.powi(2)).sqrt()
}

fn grid() -> Vec<f64> {
    ExperimentConfig::default().sweep.lambda_p
}

fn criterion_1(rows: &[SweepRow]) -> Verdict {
    let primary = stats_by(rows, |m| m.primary_throughput);
    let mut never_worse = true;
    let mut strict = 0;
    let mut worst = f64::INFINITY;
    for &l in &grid() {
        let c = &primary[&GroupKey::new(Mode::Cooperative, 0.5, l)];
        let n = &primary[&GroupKey::new(Mode::NonCooperative, 0.5, l)];
        let diff = c.mean - n.mean;
        worst = worst.min(diff);
        if diff < 0.0 {
            never_worse = false;
            println!("    lambda_p={l}: cooperative {:.4} < non-cooperative {:.4}", c.mean, n.mean);
        }
        if diff > 2.0 * se_diff(c, n) {
            strict += 1;
        }
    }
    verdict(
        never_worse && strict >= 5,
        format!("cooperative >= non-cooperative at all 9 points: {never_worse} (min diff {worst:.4}); strict > 2 SE at {strict}/9 (need 5)"),
    )
}

fn criterion_2(rows: &[SweepRow]) -> Verdict {
    let relayed = stats_by(rows, |m| m.relayed_throughput);
    let secondary = stats_by(rows, |m| m.secondary_throughput);
    let omegas = ExperimentConfig::default().sweep.omegas;
    let mut violations = Vec::new();
    for &l in &grid() {
        for (i, &wi) in omegas.iter().enumerate() {
            for &wj in &omegas[i + 1..] {
                let (ri, rj) = (&relayed[&GroupKey::new(Mode::Cooperative, wi, l)], &relayed[&GroupKey::new(Mode::Cooperative, wj, l)]);
                if rj.mean > ri.mean + 2.0 * se_diff(ri, rj) {
                    violations.push(format!("relayed lambda_p={l} w={wi}->{wj}: {:.4} -> {:.4}", ri.mean, rj.mean));
                }
                for mode in [Mode::Cooperative, Mode::NonCooperative] {
                    let (si, sj) = (&secondary[&GroupKey::new(mode, wi, l)], &secondary[&GroupKey::new(mode, wj, l)]);
                    if sj.mean < si.mean - 2.0 * se_diff(si, sj) {
                        violations.push(format!("secondary {mode} lambda_p={l} w={wi}->{wj}: {:.4} -> {:.4}", si.mean, sj.mean));
                    }
                }
            }
        }
    }
    for v in &violations {
        println!("    {v}");
    }
    verdict(violations.is_empty(), format!("{} ordering violations beyond 2 SE", violations.len()))
}

fn criterion_3() -> Verdict {
    let config = ExperimentConfig::default();
    let run = run_oracle(&config, config.run.base_seed).expect("oracle instance solvable");
    let r = &run.report;
    let rows_ok = run.row_sum_error <= 1e-12;
    let gap_ok = r.gap <= 0.05;
    verdict(
        rows_ok && gap_ok && run.solution.converged,
        format!(
            "{} states, VI converged in {} sweeps; max |row sum - 1| = {:.2e}; oracle {:.5} vs learned {:.5} mean reward over {} slots x {} seeds, gap {:.4} (need <= 0.05)",
            run.instance.state_count(),
            run.solution.sweeps,
            run.row_sum_error,
            r.oracle_mean_reward,
            r.learned_mean_reward,
            config.oracle.eval_slots,
            config.oracle.seeds.len(),
            r.gap
        ),
    )
}

fn random_model(rng: &mut RngStream) -> ModelParams {
    let mut m = ModelParams::default();
    let prob = |rng: &mut RngStream| (rng.uniform() * 100.0).round() / 100.0;
    let cap = |rng: &mut RngStream| 1 + rng.below(6) as u32;
    m.capacity = PerQueue { p: cap(rng), pe: cap(rng), s: cap(rng), ps: cap(rng), se: cap(rng) };
    let mmbp = |rng: &mut RngStream| MmbpParams { lambda: prob(rng), beta: prob(rng) };
    m.arrivals.p = mmbp(rng);
    m.arrivals.pe = mmbp(rng);
    m.arrivals.s = mmbp(rng);
    m.arrivals.se = mmbp(rng);
    let link = |rng: &mut RngStream| ChannelParams { gamma: prob(rng), q: prob(rng) };
    m.channels = PerLink { p: link(rng), s: link(rng), ps: link(rng), sp: link(rng) };
    m.direct_decode_on_accept = rng.below(2) == 1;
    m
}

fn criterion_4() -> Verdict {
    let mut rng = RngStream::new(404).substream("invariants");
    let mut slots = 0u64;
    let mut violations: Vec<String> = Vec::new();
    let record = |v: &mut Vec<String>, what: String| {
        if v.len() < 10 {
            println!("    violation: {what}");
        }
        v.push(what);
    };
    for config_no in 0..200 {
        let model = random_model(&mut rng);
        let rp = RewardParams { omega: rng.uniform(), penalty_k: 1.0 + 19.0 * rng.uniform(), ..RewardParams::default() };
        let k = rp.penalty_k;
        let mask = if config_no % 2 == 0 { ActionMask::FULL } else { ActionMask::NON_COOPERATIVE };
        let root = RngStream::new(config_no);
        let mut env = EnvStreams::new(&root.substream("env"));
        let mut state = NetworkState::initial(&model, &mut root.substream("init"));
        let allowed: Vec<Action> = mask.iter().collect();
        for _ in 0..5_000 {
            let action = allowed[rng.below(allowed.len())];
            let ctx = RewardContext::from_state(&state);
            let (next, o) = step(&state, action, &model, &mut env);
            let r = reward(&ctx, action, o.r_s, o.r_ps, &rp);
            let (q, nq) = (&state.queues, &next.queues);
            for (name, a, b) in [
                ("p", q.p, nq.p),
                ("pe", q.pe, nq.pe),
                ("s", q.s, nq.s),
                ("ps", q.ps, nq.ps),
                ("se", q.se, nq.se),
            ] {
                if b.len() > b.capacity() || a.len().abs_diff(b.len()) > 1 {
                    record(&mut violations, format!("queue bound {name}: {} -> {} (cap {})", a.len(), b.len(), b.capacity()));
                }
            }
            // Energy causality: every delivery is paid for by a stored energy packet.
            if (o.own_delivery || o.relayed_delivery) && q.se.is_empty() {
                record(&mut violations, "secondary delivery without energy".into());
            }
            if (o.direct_delivery || o.a_ps_in) && q.pe.is_empty() {
                record(&mut violations, "primary delivery without energy".into());
            }
            let se_used = u32::from(o.r_se && !q.se.is_empty());
            if nq.se.len() != q.se.len() - se_used + u32::from(o.arrivals.se && !o.drops.se) {
                record(&mut violations, "energy bookkeeping".into());
            }
            // Relay conservation: Q_ps changes only by accepted minus delivered packets.
            let expected_ps = q.ps.len() + u32::from(o.a_ps_in && !o.drops.ps) - u32::from(o.relayed_delivery);
            if nq.ps.len() != expected_ps {
                record(&mut violations, format!("relay conservation: {} -> {} expected {expected_ps}", q.ps.len(), nq.ps.len()));
            }
            if !mask.contains(Action::AcceptPrimary) && !nq.ps.is_empty() {
                record(&mut violations, "non-cooperative relay queue nonempty".into());
            }
            if o.pu_active && (o.r_s || o.r_ps || o.own_delivery || o.relayed_delivery) {
                record(&mut violations, "secondary service while the primary user is active".into());
            }
            if !(-3.0 * k..=1.0).contains(&r) || !r.is_finite() {
                record(&mut violations, format!("reward {r} outside [-{}, 1]", 3.0 * k));
            }
            state = next;
            slots += 1;
        }
    }
    verdict(violations.is_empty() && slots >= 1_000_000, format!("{slots} randomized slots over 200 configs, {} violations", violations.len()))
}

fn criterion_5() -> Verdict {
    let model = ModelParams::default().with_primary_load(0.5);
    let root = RngStream::new(505);
    let mut env = EnvStreams::new(&root.substream("env"));
    let mut state = NetworkState::initial(&model, &mut root.substream("init"));
    let n = 1_000_000u64;
    let mut arrivals = [0u64; 4];
    let mut on = [0u64; 4];
    for _ in 0..n {
        let (next, o) = step(&state, Action::Idle, &model, &mut env);
        for (count, hit) in arrivals.iter_mut().zip([o.arrivals.p, o.arrivals.pe, o.arrivals.s, o.arrivals.se]) {
            *count += u64::from(hit);
        }
        let ch = &next.channels;
        for (count, c) in on.iter_mut().zip([ch.p, ch.s, ch.ps, ch.sp]) {
            *count += u64::from(c == ChannelState::ON);
        }
        state = next;
    }
    let a = &model.arrivals;
    let c = &model.channels;
    let expected = [
        ("arrival p", arrivals[0], a.p.stationary_arrival_prob().unwrap()),
        ("arrival pe", arrivals[1], a.pe.stationary_arrival_prob().unwrap()),
        ("arrival s", arrivals[2], a.s.stationary_arrival_prob().unwrap()),
        ("arrival se", arrivals[3], a.se.stationary_arrival_prob().unwrap()),
        ("link p", on[0], c.p.stationary_on_prob().unwrap()),
        ("link s", on[1], c.s.stationary_on_prob().unwrap()),
        ("link ps", on[2], c.ps.stationary_on_prob().unwrap()),
        ("link sp", on[3], c.sp.stationary_on_prob().unwrap()),
    ];
    let mut worst = 0.0f64;
    let mut ok = true;
    for (name, count, p) in expected {
        let freq = count as f64 / n as f64;
        let err = (freq - p).abs();
        worst = worst.max(err);
        if err > 0.005 {
            ok = false;
            println!("    {name}: empirical {freq:.5} vs {p:.5}");
        }
    }
    verdict(ok, format!("8 processes over {n} slots, max |empirical - closed form| = {worst:.5} (tolerance 0.005)"))
}

fn criterion_6() -> Verdict {
    let mut config = ExperimentConfig::default();
    config.sweep.replications = 2;
    config.sweep.lambda_p = vec![0.2, 0.5, 0.8];
    config.run.train_horizon = 50_000;
    config.run.eval_horizon = 20_000;
    let csv = |threads: Option<usize>| {
        let mut buf = Vec::new();
        write_sweep_csv(&run_sweep(&config, threads).rows, &mut buf).unwrap();
        buf
    };
    let (a, b) = (csv(None), csv(Some(1)));
    let model = config.model.clone().with_primary_load(0.3);
    let setup = TrainSetup {
        model: &model,
        reward: &config.reward,
        scheme: &config.levels,
        learning: &config.learning,
        mask: ActionMask::FULL,
        horizon: 200_000,
    };
    let qtable = || {
        let mut buf = Vec::new();
        write_qtable(&train(&setup, 77).unwrap().table, &mut buf).unwrap();
        buf
    };
    let (qa, qb) = (qtable(), qtable());
    verdict(
        a == b && qa == qb,
        format!(
            "sweep CSV ({} bytes) identical across runs and thread counts: {}; Q-table artifact ({} bytes) identical: {}",
            a.len(),
            a == b,
            qa.len(),
            qa == qb
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let model = ModelParams::default();
    let cap = model.capacity;
    let with = |lens: [u32; 5], ch: [bool; 4]| {
        let mut s = NetworkState::empty(&model);
        s.queues = PerQueue {
            p: QueueState::with_len(lens[0], cap.p),
            pe: QueueState::with_len(lens[1], cap.pe),
            s: QueueState::with_len(lens[2], cap.s),
            ps: QueueState::with_len(lens[3], cap.ps),
            se: QueueState::with_len(lens[4], cap.se),
        };
        s.channels = PerLink { p: ChannelState(ch[0]), s: ChannelState(ch[1]), ps: ChannelState(ch[2]), sp: ChannelState(ch[3]) };
        s
    };
    let rp = RewardParams::default();

    // Collision: a1 while the primary user is active.
    let s = with([3, 2, 5, 0, 2], [true, true, true, true]);
    let o = service_indicators(&s, Action::TransmitOwn, &model);
    check("collision reward -10", reward(&RewardContext::from_state(&s), Action::TransmitOwn, o.r_s, o.r_ps, &rp) == -10.0);

    // a1 with the primary idle and every condition met pays omega.
    let s = with([0, 0, 5, 0, 2], [false, true, false, false]);
    let o = service_indicators(&s, Action::TransmitOwn, &model);
    check("own delivery reward +0.5", reward(&RewardContext::from_state(&s), Action::TransmitOwn, o.r_s, o.r_ps, &rp) == 0.5);

    // a3 with the primary active, direct link OFF, relay link ON: no reward.
    let s = with([3, 2, 0, 0, 0], [false, false, true, false]);
    let o = service_indicators(&s, Action::AcceptPrimary, &model);
    check("accept reward 0", reward(&RewardContext::from_state(&s), Action::AcceptPrimary, o.r_s, o.r_ps, &rp) == 0.0);
    check("accept moves packet", o.a_ps_in && o.r_p && o.r_pe);

    // a4 with the primary active and its link ON: direct decode.
    let s = with([3, 2, 0, 0, 0], [true, false, false, false]);
    let o = service_indicators(&s, Action::Idle, &model);
    check("direct decode", o.r_p && o.r_pe && o.direct_delivery && !o.r_s && !o.r_ps && !o.a_ps_in && !o.r_se);

    // a1 on an OFF link wastes energy.
    let s = with([0, 0, 5, 0, 2], [false, false, false, false]);
    let o = service_indicators(&s, Action::TransmitOwn, &model);
    check("energy wasted", !o.r_s && o.r_se && o.energy_wasted);

    // a2 delivery with no arrivals: Q_ps 4 -> 3, Q_se 1 -> 0.
    let mut silent = model.clone();
    let never = MmbpParams { lambda: 1.0, beta: 1.0 };
    silent.arrivals.p = never;
    silent.arrivals.pe = never;
    silent.arrivals.s = never;
    silent.arrivals.se = never;
    let s = with([0, 0, 0, 4, 1], [false, false, false, true]);
    let mut env = EnvStreams::new(&RngStream::new(7));
    let (next, o) = step(&s, Action::TransmitRelay, &silent, &mut env);
    check("a2 delivery", next.queues.ps.len() == 3 && next.queues.se.is_empty() && o.relayed_delivery);

    let scheme = LevelScheme::default();
    for (len, level) in [(0, 0), (6, 1), (7, 2), (12, 2), (13, 3), (20, 3)] {
        check(&format!("quantize {len} -> {level}"), quantize_level(len, &scheme) == level);
    }
    verdict(failures.is_empty(), if failures.is_empty() { "all fixtures exact".to_string() } else { format!("failed: {failures:?}") })
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> =
        std::env::var("COGRELAY_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));
    let names = [
        "cooperation benefit",
        "omega ordering",
        "oracle equivalence",
        "invariant suite",
        "stationary distributions",
        "determinism",
        "hand-computed fixtures",
    ];
    let mut sweep: Option<Vec<SweepRow>> = None;
    let mut failed = 0;
    for n in 1..=7u32 {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let v = match n {
            1 | 2 => {
                let rows = sweep.get_or_insert_with(default_sweep);
                if n == 1 {
                    criterion_1(rows)
                } else {
                    criterion_2(rows)
                }
            }
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            _ => criterion_7(),
        };
        failed += u32::from(!v.pass);
        println!(
            "{} criterion {n} ({}): {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            names[n as usize - 1],
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

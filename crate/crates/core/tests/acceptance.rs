//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use firesafe::cli::{self, ExitStatus, ModemTarget, ReportKind};
use firesafe::config::{parse_config, Config};
use firesafe::controller::{step, Action, ControllerState, InputEvent, InputKind, Phase, TimerKind};
use firesafe::gsm::server::serve;
use firesafe::gsm::{CommandKind, FaultBehavior, FaultRule, InProcLink, ModemClient, RetryPolicy, SmsOutcome};
use firesafe::plant::{apply_action, sensor_update, PlantState, SensorOutput};
use firesafe::report::{aggregate, bundled_regions, bundled_sectors, REGIONS_CSV, SECTORS_CSV};
use firesafe::sim::{
    fault_event, parse_scenario, run_scenario, run_scenario_with_link, EventKind, RecordKind, Scenario,
    ScenarioEvent, TranscriptRecord,
};
use firesafe::validate_phone;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn default_config() -> Config {
    parse_config(include_str!("../configs/default.json")).expect("bundled config is valid")
}

fn scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(root().join("scenarios").join(format!("{name}.json")))
        .expect("bundled scenario exists");
    parse_scenario(&text).expect("bundled scenario is valid")
}

fn bundled_scenarios() -> Vec<PathBuf> {
    let mut paths: Vec<_> = std::fs::read_dir(root().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn action_times(records: &[TranscriptRecord], action: &str) -> Vec<u64> {
    records
        .iter()
        .filter(|r| r.kind == RecordKind::Action && r.str_field("action") == Some(action))
        .map(|r| r.t)
        .collect()
}

/// (t, recipient, wave) of every record of `kind`.
fn notifications(records: &[TranscriptRecord], kind: RecordKind) -> Vec<(u64, String, u64)> {
    records
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| {
            (
                r.t,
                r.str_field("recipient").unwrap_or_default().to_string(),
                r.u64_field("wave").unwrap_or_default(),
            )
        })
        .collect()
}

fn ac1_flagship() -> Outcome {
    let cfg = default_config();
    let debounce = cfg.timing.debounce;
    let resend = cfg.timing.resend_delay;
    let call = cfg.timing.call_delay;
    ensure((10_000..=15_000).contains(&resend), || format!("resend_delay {resend} outside [10 s, 15 s]"))?;
    ensure(call == 15_000, || format!("call_delay {call} != 15000"))?;

    let started = Instant::now();
    let records = run_scenario(&cfg, &scenario("flagship")).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    let cutoffs: Vec<u64> = records
        .iter()
        .filter(|r| r.kind == RecordKind::PowerChange && r.bool_field("loads_powered") == Some(false))
        .map(|r| r.t)
        .collect();
    ensure(cutoffs == [debounce], || format!("power cutoff at {cutoffs:?}, expected [{debounce}]"))?;
    ensure(action_times(&records, "siren_on") == [debounce], || "siren_on not on the cutoff tick".into())?;
    ensure(action_times(&records, "emergency_light_on") == [debounce], || {
        "emergency_light_on not on the cutoff tick".into()
    })?;
    let sms = notifications(&records, RecordKind::SmsDelivered);
    let want_sms = vec![
        (debounce, "owner".to_string(), 1),
        (resend, "owner".to_string(), 2),
        (resend, "fire_service".to_string(), 2),
    ];
    ensure(sms == want_sms, || format!("SMS deliveries {sms:?}, expected {want_sms:?}"))?;
    let calls = notifications(&records, RecordKind::CallPlaced);
    let want_calls = vec![(call, "owner".to_string(), 3), (call, "fire_service".to_string(), 3)];
    ensure(calls == want_calls, || format!("calls {calls:?}, expected {want_calls:?}"))?;
    ensure(
        !records.iter().any(|r| r.kind == RecordKind::NotificationFailed),
        || "unexpected notification failure".into(),
    )?;
    ensure(elapsed < Duration::from_secs(1), || format!("runtime {elapsed:?} >= 1 s"))?;
    Ok(format!(
        "cutoff/siren/light/SMS@{debounce}, reminders@{resend}, calls@{call}, {elapsed:.1?}"
    ))
}

fn ac2_reset_suppression() -> Outcome {
    let cfg = default_config();
    let no_restore = Scenario::new(
        "reset_only",
        vec![
            ScenarioEvent::new(0, EventKind::SetSmoke(0.9)),
            ScenarioEvent::new(5_000, EventKind::PressReset),
        ],
        30_000,
    )
    .map_err(|e| e.to_string())?;
    let records = run_scenario(&cfg, &no_restore).map_err(|e| e.to_string())?;
    let calls = notifications(&records, RecordKind::CallPlaced);
    ensure(calls.is_empty(), || format!("calls placed: {calls:?}"))?;
    let dials = action_times(&records, "dial");
    ensure(dials.is_empty(), || format!("dial actions at {dials:?}"))?;
    let late_sms: Vec<_> = notifications(&records, RecordKind::SmsDelivered)
        .into_iter()
        .filter(|(_, _, wave)| *wave >= 2)
        .collect();
    ensure(late_sms.is_empty(), || format!("wave-2 SMS delivered: {late_sms:?}"))?;
    ensure(action_times(&records, "siren_off") == [5_000], || "siren not switched off at 5000".into())?;
    let last_power = records.iter().rev().find(|r| r.kind == RecordKind::PowerChange);
    ensure(
        last_power.and_then(|r| r.bool_field("loads_powered")) == Some(false),
        || "loads powered again without restore".into(),
    )?;
    ensure(action_times(&records, "energize_contactor").is_empty(), || {
        "contactor energized without restore".into()
    })?;

    // The bundled variant restores at 20 s; loads come back exactly then.
    let records = run_scenario(&cfg, &scenario("reset_at_5s")).map_err(|e| e.to_string())?;
    let repowered: Vec<u64> = records
        .iter()
        .filter(|r| r.kind == RecordKind::PowerChange && r.bool_field("loads_powered") == Some(true))
        .map(|r| r.t)
        .collect();
    ensure(repowered == [20_000], || format!("loads repowered at {repowered:?}, expected [20000]"))?;
    ensure(notifications(&records, RecordKind::CallPlaced).is_empty(), || "calls placed".into())?;
    Ok("no calls, no wave-2 SMS, siren off @5000, loads dark until restore".into())
}

fn random_scenario(rng: &mut StdRng, i: usize) -> Scenario {
    let horizon = 45_000;
    let n = rng.gen_range(0..14);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let at = rng.gen_range(0..40_000);
        let kind = match rng.gen_range(0..100) {
            0..=34 => EventKind::SetSmoke(rng.gen_range(0.0..=1.0)),
            35..=49 => EventKind::PressReset,
            50..=64 => EventKind::PressRestore,
            65..=72 => EventKind::MainsFail,
            73..=80 => EventKind::MainsRestore,
            81..=84 => EventKind::BackupFail,
            _ => {
                let on = [CommandKind::SmsBody, CommandKind::Cmgs, CommandKind::Dial, CommandKind::TextMode]
                    [rng.gen_range(0..4)];
                let behavior = [FaultBehavior::ReplyError, FaultBehavior::CmsError(500), FaultBehavior::Drop]
                    [rng.gen_range(0..3)];
                events.push(fault_event(at, FaultRule::new(on, behavior), rng.gen_range(1..4)));
                continue;
            }
        };
        events.push(ScenarioEvent::new(at, kind));
    }
    // Most runs start with a fire so that escalation is exercised.
    if rng.gen_bool(0.8) {
        events.push(ScenarioEvent::new(rng.gen_range(0..2_000), EventKind::SetSmoke(0.9)));
    }
    Scenario::new(format!("random-{i}"), events, horizon).unwrap()
}

/// Every fire-service notification of a kind must follow the owner's
/// notification of that kind within the same wave.
fn ordering_violations(records: &[TranscriptRecord]) -> Vec<String> {
    let mut seen: BTreeMap<(u64, &str), Vec<&str>> = BTreeMap::new();
    let mut violations = Vec::new();
    for r in records {
        let kind = match (r.kind, r.str_field("action")) {
            (RecordKind::Action, Some("send_sms")) => "sms",
            (RecordKind::Action, Some("dial")) => "call",
            _ => continue,
        };
        let wave = r.u64_field("wave").unwrap_or_default();
        let who = r.str_field("recipient").unwrap_or_default();
        let prior = seen.entry((wave, kind)).or_default();
        if who == "fire_service" && !prior.contains(&"owner") {
            violations.push(format!("{kind} to fire_service before owner in wave {wave} at t={}", r.t));
        }
        prior.push(who);
    }
    // Outcome records follow the same order as the attempts.
    let outcomes: Vec<_> = records
        .iter()
        .filter(|r| {
            matches!(
                r.kind,
                RecordKind::SmsDelivered | RecordKind::CallPlaced | RecordKind::NotificationFailed
            )
        })
        .collect();
    let mut first_owner: BTreeMap<(u64, bool), usize> = BTreeMap::new();
    for (i, r) in outcomes.iter().enumerate() {
        let is_sms = r.kind == RecordKind::SmsDelivered || r.str_field("notification") == Some("SMS");
        let key = (r.u64_field("wave").unwrap_or_default(), is_sms);
        match r.str_field("recipient") {
            Some("owner") => {
                first_owner.entry(key).or_insert(i);
            }
            Some("fire_service") if !first_owner.contains_key(&key) => {
                violations.push(format!("outcome for fire_service before owner in wave {}", key.0));
            }
            _ => {}
        }
    }
    violations
}

fn ac3_ordering() -> Outcome {
    let cfg = default_config();
    let mut rng = StdRng::seed_from_u64(0x5EED_0003);
    let mut fs_notifications = 0usize;
    for i in 0..1000 {
        let s = random_scenario(&mut rng, i);
        let records = run_scenario(&cfg, &s).map_err(|e| format!("{}: {e}", s.name))?;
        let v = ordering_violations(&records);
        if let Some(first) = v.first() {
            return Err(format!("{}: {} violation(s), first: {first}", s.name, v.len()));
        }
        fs_notifications += records
            .iter()
            .filter(|r| r.kind == RecordKind::Action && r.str_field("recipient") == Some("fire_service"))
            .count();
    }
    ensure(fs_notifications > 0, || "no fire-service notification was exercised".into())?;
    Ok(format!("1000 scenarios, {fs_notifications} fire-service notifications, 0 violations"))
}

fn random_phone(rng: &mut StdRng) -> String {
    let len = rng.gen_range(8..=15);
    let digits: String = (0..len).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect();
    format!("+{digits}")
}

fn random_body(rng: &mut StdRng) -> String {
    let len = rng.gen_range(0..=160);
    (0..len).map(|_| char::from(rng.gen_range(0x20u8..=0x7E))).collect()
}

fn ac4_at_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5EED_0004);
    let started = Instant::now();
    let mut client = ModemClient::new(InProcLink::default());
    let policy = RetryPolicy { limit: 1, backoff_ms: 0 };
    for i in 0..1000 {
        let to = random_phone(&mut rng);
        let body = random_body(&mut rng);
        let number = validate_phone(&to).map_err(|e| format!("{to}: {e}"))?;
        match client.send_sms(&number, &body, policy).map_err(|e| e.to_string())? {
            SmsOutcome::Sent { .. } => {}
            SmsOutcome::Failed { last, .. } => {
                return Err(format!("pair {i} rejected: {}", last.describe()))
            }
        }
        let log = client.link().network_log();
        ensure(log.len() == i + 1, || format!("pair {i}: {} log entries, expected {}", log.len(), i + 1))?;
        let entry = &log[i];
        ensure(entry.body.as_bytes() == body.as_bytes() && entry.to.as_str() == to, || {
            format!("pair {i}: logged ({}, {:?}) != sent ({to}, {body:?})", entry.to, entry.body)
        })?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("runtime {elapsed:?} >= 5 s"))?;
    Ok(format!("1000 pairs, 0 mismatches, {elapsed:.1?}"))
}

fn ac5_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = root().join("configs/default.json");
    let scenarios = bundled_scenarios();
    ensure(!scenarios.is_empty(), || "no bundled scenarios".into())?;

    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    let sessions = scenarios.len();
    let server = thread::spawn(move || {
        let mut log = Vec::new();
        serve(&listener, &[], &mut log, Some(sessions)).map(|_| log)
    });

    let run = |scenario: &Path, out: &Path, modem: &ModemTarget| -> Result<Vec<u8>, String> {
        let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
        let status = cli::cmd_run(&config, scenario, out, modem, &mut stdout, &mut stderr);
        ensure(status == ExitStatus::Success, || {
            format!("{}: {status:?}: {}", scenario.display(), String::from_utf8_lossy(&stderr))
        })?;
        std::fs::read(out).map_err(|e| e.to_string())
    };
    let tcp = ModemTarget::Tcp(addr.to_string());
    let mut inproc_log = Vec::new();
    for s in &scenarios {
        let stem = s.file_stem().unwrap().to_string_lossy();
        let a = run(s, &dir.path().join(format!("{stem}.a.jsonl")), &ModemTarget::InProc)?;
        let b = run(s, &dir.path().join(format!("{stem}.b.jsonl")), &ModemTarget::InProc)?;
        ensure(a == b, || format!("{stem}: repeated runs differ"))?;
        let t = run(s, &dir.path().join(format!("{stem}.tcp.jsonl")), &tcp)?;
        ensure(a == t, || format!("{stem}: in-process and TCP transcripts differ"))?;

        let parsed = parse_scenario(&std::fs::read_to_string(s).unwrap()).unwrap();
        let (_, link) = run_scenario_with_link(&default_config(), &parsed, InProcLink::default())
            .map_err(|e| e.to_string())?;
        for entry in link.network_log() {
            inproc_log.push(serde_json::to_string(entry).unwrap());
        }
    }
    let tcp_log = server.join().map_err(|_| "server panicked".to_string())?.map_err(|e| e.to_string())?;
    let tcp_log: Vec<String> = String::from_utf8(tcp_log)
        .map_err(|e| e.to_string())?
        .lines()
        .map(str::to_string)
        .collect();
    ensure(tcp_log == inproc_log, || "TCP modem log differs from the in-process log".into())?;
    Ok(format!(
        "{} scenarios byte-identical across reruns and transports, {} modem log entries match",
        scenarios.len(),
        tcp_log.len()
    ))
}

fn ac6_fault_handling() -> Outcome {
    let base = default_config();
    let backoff = base.sms_retry_backoff;
    let fault = |mut events: Vec<ScenarioEvent>| {
        let spec = serde_json::json!({"on": "sms_body", "behavior": "cms_error", "code": 500, "repeat": 2});
        events.insert(0, ScenarioEvent::new(0, EventKind::ModemFault(serde_json::from_value(spec).unwrap())));
        Scenario::new("two_cms_errors", events, 30_000).unwrap()
    };
    let smoke = || vec![ScenarioEvent::new(0, EventKind::SetSmoke(0.9))];

    let clean = run_scenario(&base, &Scenario::new("clean", smoke(), 30_000).unwrap())
        .map_err(|e| e.to_string())?;
    let clean_first = clean.iter().find(|r| r.kind == RecordKind::SmsDelivered).map(|r| r.t);

    let mut cfg = base.clone();
    cfg.sms_retry_limit = 3;
    let records = run_scenario(&cfg, &fault(smoke())).map_err(|e| e.to_string())?;
    let first = records
        .iter()
        .find(|r| r.kind == RecordKind::SmsDelivered)
        .ok_or("no SMS delivered with retry limit 3")?;
    ensure(first.u64_field("attempts") == Some(3), || {
        format!("delivered on attempt {:?}, expected 3", first.u64_field("attempts"))
    })?;
    let shift = first.t - clean_first.unwrap_or_default();
    ensure(shift == 2 * backoff, || format!("delivery shifted by {shift} ms, expected {}", 2 * backoff))?;

    cfg.sms_retry_limit = 2;
    let (records, link) = run_scenario_with_link(&cfg, &fault(smoke()), InProcLink::default())
        .map_err(|e| e.to_string())?;
    let failed = records
        .iter()
        .find(|r| r.kind == RecordKind::NotificationFailed)
        .ok_or("no NOTIFICATION_FAILED with retry limit 2")?;
    ensure(failed.u64_field("wave") == Some(1) && failed.u64_field("attempts") == Some(2), || {
        format!("unexpected failure record {}", failed.to_json_line())
    })?;
    let wave1_body = cfg.render(&cfg.initial_template, 0);
    ensure(!link.network_log().iter().any(|e| e.body == wave1_body), || {
        "failed SMS reached the network log".into()
    })?;
    Ok(format!("limit 3: attempt 3, +{} ms; limit 2: NOTIFICATION_FAILED, not logged", 2 * backoff))
}

fn fold_total(csv: &str) -> u64 {
    csv.lines().skip(1).filter_map(|l| l.rsplit(',').next()?.trim().parse::<u64>().ok()).sum()
}

fn ac7_tables() -> Outcome {
    let checks = [
        ("regions", REGIONS_CSV, "ghana_2018_regions.csv", bundled_regions(), ("Ashanti Region", 542), ("Upper West Region", 64), 2728),
        ("sectors", SECTORS_CSV, "ghana_2018_sectors.csv", bundled_sectors(), ("Domestic", 1794), ("Industrial", 110), 4280),
    ];
    for (name, csv, file, records, max, min, total) in checks {
        ensure(fold_total(csv) == total, || format!("{name}: fold gives {}, expected {total}", fold_total(csv)))?;
        let s = aggregate(&records).map_err(|e| e.to_string())?;
        ensure(s.total == total, || format!("{name}: total {} != {total}", s.total))?;
        let got = |r: &Option<firesafe::report::IncidentRecord>| r.as_ref().map(|r| (r.category.clone(), r.count));
        ensure(got(&s.max) == Some((max.0.into(), max.1)), || format!("{name}: max {:?}", s.max))?;
        ensure(got(&s.min) == Some((min.0.into(), min.1)), || format!("{name}: min {:?}", s.min))?;

        let (mut out, mut err) = (Vec::new(), Vec::new());
        let status = cli::cmd_report(ReportKind::Incidents, &root().join("fixtures").join(file), &mut out, &mut err);
        ensure(status == ExitStatus::Success, || format!("{name}: report exited {status:?}"))?;
        let text = String::from_utf8(out).map_err(|e| e.to_string())?;
        let top = format!("{} {}", max.0, max.1);
        ensure(text.lines().next() == Some(top.as_str()), || format!("{name}: top row is not `{top}`"))?;
        for line in [format!("total {total}"), format!("max {top}"), format!("min {} {}", min.0, min.1)] {
            ensure(text.lines().any(|l| l == line), || format!("{name}: report lacks `{line}`"))?;
        }
    }
    Ok("Ashanti Region 542 / Upper West Region 64 / 2728; Domestic 1794 / Industrial 110 / 4280".into())
}

const MODEL_EVENTS: [InputKind; 5] = [
    InputKind::SmokeHigh { onset: 0 },
    InputKind::ResetPressed,
    InputKind::RestorePressed,
    InputKind::TimerFired(TimerKind::Resend),
    InputKind::TimerFired(TimerKind::Call),
];

fn explore(
    cfg: &Config,
    state: &ControllerState,
    plant: &PlantState,
    depth: usize,
    trace: &mut Vec<InputKind>,
    visited: &mut usize,
) -> Result<(), String> {
    if depth == 6 {
        return Ok(());
    }
    for kind in MODEL_EVENTS {
        let at = (trace.len() as u64 + 1) * 7_000;
        let kind = match kind {
            InputKind::SmokeHigh { .. } => InputKind::SmokeHigh { onset: at },
            k => k,
        };
        trace.push(kind);
        *visited += 1;
        let (next, actions) = step(state, &InputEvent::new(at, kind), cfg);
        let mut p = plant.clone();
        for a in &actions {
            if *a == Action::EnergizeContactor && kind != InputKind::RestorePressed {
                return Err(format!("EnergizeContactor without RestorePressed after {trace:?}"));
            }
            p = apply_action(&p, a);
        }
        next.check_invariants().map_err(|e| format!("{e} after {trace:?}"))?;
        p.check_invariants().map_err(|e| format!("{e} after {trace:?}"))?;
        if next.phase != Phase::Normal && p.loads_powered {
            return Err(format!("loads powered in {} after {trace:?}", next.phase.name()));
        }
        if next.phase.is_sounding() != p.siren_on {
            return Err(format!("siren {} in {} after {trace:?}", p.siren_on, next.phase.name()));
        }
        explore(cfg, &next, &p, depth + 1, trace, visited)?;
        trace.pop();
    }
    Ok(())
}

fn ac8_model_check() -> Outcome {
    let cfg = default_config();
    let started = Instant::now();
    let mut visited = 0;
    explore(&cfg, &ControllerState::normal(), &PlantState::default(), 0, &mut Vec::new(), &mut visited)?;
    let elapsed = started.elapsed();
    let expected: usize = (1..=6).map(|n| 5usize.pow(n)).sum();
    ensure(visited == expected, || format!("visited {visited} sequences, expected {expected}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("runtime {elapsed:?} >= 10 s"))?;
    Ok(format!("{visited} non-empty sequences of length <= 6, 0 violations, {elapsed:.1?}"))
}

fn ac9_hysteresis() -> Outcome {
    let cfg = default_config();
    let (threshold, release) = (cfg.smoke_threshold, cfg.smoke_threshold * cfg.hysteresis_ratio);
    let mut mismatches = 0;
    for i in 0..1000 {
        let level = i as f64 / 999.0;
        let trip = sensor_update(SensorOutput::Low, level, &cfg);
        let hold = sensor_update(SensorOutput::High, level, &cfg);
        let want_trip = if level > threshold { SensorOutput::High } else { SensorOutput::Low };
        let want_hold = if level <= release { SensorOutput::Low } else { SensorOutput::High };
        if trip != want_trip || hold != want_hold {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
    Ok(format!("1000 levels, trip > {threshold}, release <= {release:.2}, 0 mismatches"))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 9] = [
        ("AC1 flagship timeline", ac1_flagship),
        ("AC2 reset suppression", ac2_reset_suppression),
        ("AC3 owner-first ordering", ac3_ordering),
        ("AC4 AT round trip", ac4_at_round_trip),
        ("AC5 determinism and transport equivalence", ac5_determinism),
        ("AC6 fault handling", ac6_fault_handling),
        ("AC7 table fidelity", ac7_tables),
        ("AC8 model check", ac8_model_check),
        ("AC9 hysteresis sweep", ac9_hysteresis),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

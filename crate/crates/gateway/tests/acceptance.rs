//! Acceptance checks, one PASS/FAIL line each. Runs with `harness = false`
//! and exits non-zero when any check fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::Gateway;
use fsa_core::fuzzy::{default_engine, default_registry, defuzzify_centroid, OutputFuzzySet};
use fsa_core::rules::{default_rule_base, parse_rules, pretty_print, Expr, RuleBase};
use fsa_core::scenario::{chest_pain, parse_transcript, StudentEvent};
use fsa_core::store::{Durability, FileStore};
use fsa_core::supervisor::{logged_decisions, Session, Step, Supervisor};
use fsa_core::{Criterion, CriterionScores};

const RELEVANCE_HINT: &str =
    "Consider focusing your questions on symptoms related to chest pain and cardiovascular risk factors.";
const CONSENT_HINT: &str =
    "Before proceeding, ensure you have explained the procedure and obtained the patient's consent.";

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, Check); 9] = [
        ("reproduction A: partially relevant questioning escalates to High", reproduction_a),
        ("reproduction B: intervention without consent escalates to Very High", reproduction_b),
        ("rule corner suite", corner_suite),
        ("centroid oracle", centroid_oracle),
        ("Ruspini partition", ruspini_partition),
        ("label monotonicity", label_monotonicity),
        ("parser round-trip", parser_round_trip),
        ("replay determinism", replay_determinism),
        ("fallback safety", fallback_safety),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({elapsed:.3} s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.3} s): {reason}");
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn transcript(name: &str) -> Vec<StudentEvent> {
    let text = std::fs::read_to_string(workspace_file(&format!("transcripts/{name}"))).unwrap();
    parse_transcript(&text).unwrap()
}

fn replay_escalation() -> (Vec<StudentEvent>, Vec<Step>) {
    let events = transcript("chest_pain_escalation.jsonl");
    let steps = Supervisor::default().replay_events(Arc::new(chest_pain()), &events).unwrap();
    (events, steps)
}

// Reproductions

fn reproduction_a() -> Result<String, String> {
    let started = Instant::now();
    let (_, steps) = replay_escalation();
    let elapsed = started.elapsed();
    let (i, step) = steps
        .iter()
        .enumerate()
        .find(|(_, s)| s.scores.medical_relevance > 0.0 && s.scores.medical_relevance < 1.0)
        .ok_or("no partially relevant question in the transcript")?;
    let d = &step.decision;
    let out = default_registry().output().clone();
    let dominant = out.fuzzify(d.assistance.crisp).unwrap().dominant().to_string();
    ensure(d.assistance.label == "High", || format!("event {} labelled {}", i + 1, d.assistance.label))?;
    ensure(dominant == "High", || format!("crisp {} is dominated by {dominant}", d.assistance.crisp))?;
    ensure(d.hint.as_deref() == Some(RELEVANCE_HINT), || format!("hint was {:?}", d.hint))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "event {} rel={} dist={} -> {} (crisp {:.3}), relevance hint verbatim, {:.1} ms",
        i + 1,
        step.scores.medical_relevance,
        step.scores.contextual_distraction,
        d.assistance.label,
        d.assistance.crisp,
        elapsed.as_secs_f64() * 1e3
    ))
}

fn reproduction_b() -> Result<String, String> {
    let started = Instant::now();
    let (events, steps) = replay_escalation();
    let elapsed = started.elapsed();
    let (i, step) = events
        .iter()
        .zip(&steps)
        .enumerate()
        .find(|(_, (e, _))| e.action.is_some() && e.target.to_string() == "intervention")
        .map(|(i, (_, s))| (i, s))
        .ok_or("no intervention in the transcript")?;
    let d = &step.decision;
    ensure(d.assistance.label == "Very High", || format!("event {} labelled {}", i + 1, d.assistance.label))?;
    ensure(d.hint.as_deref() == Some(CONSENT_HINT), || format!("hint was {:?}", d.hint))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "event {} eth={} -> {} (crisp {:.3}), consent hint verbatim, {:.1} ms",
        i + 1,
        step.scores.ethical_behavior,
        d.assistance.label,
        d.assistance.crisp,
        elapsed.as_secs_f64() * 1e3
    ))
}

// Rule corners

/// Crisp values that make `expr` fully true: every conjunct's label center,
/// and the first alternative of every disjunction.
fn witness(expr: &Expr, out: &mut BTreeMap<String, String>) {
    match expr {
        Expr::Atom(a) => {
            out.insert(a.variable.clone(), a.label.clone());
        }
        Expr::And(children) => children.iter().for_each(|c| witness(c, out)),
        Expr::Or(children) => witness(&children[0], out),
    }
}

fn scores_from(values: &BTreeMap<&str, f64>) -> CriterionScores {
    let get = |c: Criterion| values.get(c.variable_name()).copied().unwrap_or(1.0);
    CriterionScores::new(
        get(Criterion::Professionalism),
        get(Criterion::MedicalRelevance),
        get(Criterion::EthicalBehavior),
        get(Criterion::ContextualDistraction),
    )
    .unwrap()
}

fn corner_suite() -> Result<String, String> {
    let engine = default_engine();
    let registry = engine.registry();
    let out = registry.output();
    let mut labels = Vec::new();
    for rule in engine.rules().rules() {
        let mut assignment = BTreeMap::new();
        witness(&rule.antecedent, &mut assignment);
        let values: BTreeMap<&str, f64> = assignment
            .iter()
            .map(|(var, label)| (var.as_str(), registry.input(var).unwrap().center(label).unwrap()))
            .collect();
        let d = engine.evaluate(&scores_from(&values)).unwrap();
        let own = d.fired.iter().find(|f| f.rule_id == rule.id).map_or(0.0, |f| f.strength);
        ensure((own - 1.0).abs() <= 1e-9, || format!("rule {} fired at {own}", rule.id))?;
        let full: Vec<usize> = d.fired.iter().filter(|f| (f.strength - 1.0).abs() <= 1e-9).map(|f| f.rule_id).collect();
        let expected = d
            .fired
            .iter()
            .filter(|f| full.contains(&f.rule_id))
            .map(|f| out.label_index(&f.consequent).unwrap())
            .max()
            .unwrap();
        let duplicated_pair = full.contains(&5) && full.contains(&11);
        let ok = if duplicated_pair {
            d.label == "Minimal" || d.label == "Low"
        } else {
            d.severity == expected
        };
        ensure(ok, || {
            format!("rule {}: label {} but fully fired rules {full:?} peak at {}", rule.id, d.label, out.label_name(expected))
        })?;
        labels.push(format!("{}:{}", rule.id, d.label));
    }
    ensure(labels.len() == 12, || format!("{} rules", labels.len()))?;
    Ok(labels.join(" "))
}

// Centroid

/// Output membership written out independently: six triangles on [0, 1]
/// with centers i/5 and half-width 1/5. Between centers i/5 and (i+1)/5 only
/// triangles i and i+1 are non-zero.
fn oracle_degree(heights: &[f64; 6], x: f64) -> f64 {
    let i = ((x * 5.0).floor() as usize).min(4);
    let t = x * 5.0 - i as f64;
    let left = (1.0 - t).min(heights[i]);
    let right = t.min(heights[i + 1]);
    left.max(right).max(0.0)
}

fn grid_centroid(heights: &[f64; 6]) -> f64 {
    const STEP: f64 = 1e-5;
    let n = (1.0 / STEP).round() as usize;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        let x = (k as f64 + 0.5) * STEP;
        let mu = oracle_degree(heights, x);
        num += x * mu;
        den += mu;
    }
    num / den
}

fn centroid_oracle() -> Result<String, String> {
    let started = Instant::now();
    let registry = default_registry();
    let out = registry.output();
    for (i, label) in out.labels().enumerate() {
        let c = out.center(label).unwrap();
        ensure((c - i as f64 / 5.0).abs() < 1e-12, || format!("{label} centered at {c}, oracle assumes {}", i as f64 / 5.0))?;
    }
    let names: Vec<String> = out.labels().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c3a7);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let mut heights = [0.0; 6];
        let count = rng.gen_range(1..=6);
        let mut idx: Vec<usize> = (0..6).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..count] {
            heights[i] = rng.gen_range(1e-3..=1.0);
        }
        let clips: Vec<(String, f64)> =
            heights.iter().enumerate().filter(|(_, h)| **h > 0.0).map(|(i, h)| (names[i].clone(), *h)).collect();
        let set = OutputFuzzySet::from_clips(clips).unwrap();
        let exact = defuzzify_centroid(&set, out).unwrap();
        let numeric = grid_centroid(&heights);
        let err = (exact - numeric).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("set {trial} {heights:?}: closed form {exact}, grid {numeric}"))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 sets, max |error| {worst:.2e}, {:.2} s", elapsed.as_secs_f64()))
}

// Partitions

fn ruspini_partition() -> Result<String, String> {
    let registry = default_registry();
    let mut worst: f64 = 0.0;
    let mut names = Vec::new();
    for var in registry.all() {
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            let sum: f64 = (0..var.len()).map(|i| var.membership_function(i).degree(x).unwrap()).sum();
            worst = worst.max((sum - 1.0).abs());
            ensure((sum - 1.0).abs() <= 1e-9, || format!("{} sums to {sum} at {x}", var.name()))?;
        }
        names.push(var.name().to_string());
    }
    ensure(names.len() == 5, || format!("{} variables", names.len()))?;
    Ok(format!("{} on 1001 points each, max |sum - 1| {worst:.1e}", names.join(", ")))
}

fn label_monotonicity() -> Result<String, String> {
    let engine = default_engine();
    let registry = engine.registry();
    let mut paths = Vec::new();
    for var in registry.inputs() {
        let mut centers: Vec<f64> = var.labels().map(|l| var.center(l).unwrap()).collect();
        centers.sort_by(|a, b| b.total_cmp(a));
        let mut previous = 0;
        let mut path = Vec::new();
        for x in std::iter::once(1.0).chain(centers) {
            let d = engine.evaluate(&scores_from(&BTreeMap::from([(var.name(), x)]))).unwrap();
            ensure(d.severity >= previous, || {
                format!("{} at {x}: {} after severity {previous}", var.name(), d.label)
            })?;
            previous = d.severity;
            path.push(d.label);
        }
        paths.push(format!("{}[{}]", var.name(), path.join(" > ")));
    }
    Ok(paths.join("; "))
}

// Rule language

const KEYWORDS_CASES: [fn(&str) -> String; 3] = [|k| k.to_uppercase(), |k| k.to_lowercase(), |k| {
    let mut c = k.chars();
    c.next().map(|f| f.to_uppercase().collect::<String>() + &c.as_str().to_lowercase()).unwrap_or_default()
}];

struct RuleWriter<'a> {
    rng: &'a mut ChaCha8Rng,
    inputs: Vec<(String, Vec<String>)>,
}

impl RuleWriter<'_> {
    fn kw(&mut self, k: &str) -> String {
        KEYWORDS_CASES[self.rng.gen_range(0..3)](k)
    }

    fn label(&mut self, label: &str) -> String {
        if label.contains(' ') || self.rng.gen_bool(0.3) {
            format!("\"{label}\"")
        } else {
            label.to_string()
        }
    }

    /// Random antecedent as text together with the tree it should parse to.
    /// `tight` is true when the result sits directly inside an AND.
    fn expr(&mut self, depth: u32, tight: bool) -> (String, Expr) {
        let leaf = depth == 0 || self.rng.gen_bool(0.35);
        if leaf {
            let (var, labels) = self.inputs[self.rng.gen_range(0..self.inputs.len())].clone();
            let mut picks = labels.clone();
            picks.shuffle(self.rng);
            let n = if self.rng.gen_bool(0.2) { self.rng.gen_range(2..=labels.len().min(3)) } else { 1 };
            let picks = &picks[..n];
            let mut text = format!("{var} {} {}", self.kw("is"), self.label(&picks[0]));
            for p in &picks[1..] {
                text += &format!(" {} {}", self.kw("or"), self.label(p));
            }
            let tree = Expr::or(picks.iter().map(|p| Expr::atom(&var, p)).collect());
            return (text, tree);
        }
        let conj = self.rng.gen_bool(0.5);
        let n = self.rng.gen_range(2..=3);
        let mut parts = Vec::new();
        let mut trees = Vec::new();
        for _ in 0..n {
            let (t, e) = self.expr(depth - 1, conj);
            parts.push(t);
            trees.push(e);
        }
        let op = if conj { self.kw("and") } else { self.kw("or") };
        let text = parts.join(&format!(" {op} "));
        let tree = if conj { Expr::and(trees) } else { Expr::or(trees) };
        let wrap = (!conj && tight) || self.rng.gen_bool(0.2);
        (if wrap { format!("({text})") } else { text }, tree)
    }

    fn file(&mut self, outputs: &[String]) -> (String, Vec<(Expr, String)>) {
        let mut text = String::new();
        let mut expected = Vec::new();
        for _ in 0..self.rng.gen_range(1..=15) {
            if self.rng.gen_bool(0.2) {
                text += "# a comment line\n";
            }
            if self.rng.gen_bool(0.1) {
                text += "\n";
            }
            let (antecedent, tree) = self.expr(3, false);
            let consequent = outputs[self.rng.gen_range(0..outputs.len())].clone();
            let line = format!(
                "{} {antecedent} {} Assistance {} {}",
                self.kw("if"),
                self.kw("then"),
                self.kw("is"),
                self.label(&consequent)
            );
            text += &line;
            if self.rng.gen_bool(0.2) {
                text += ";";
            }
            if self.rng.gen_bool(0.1) {
                text += "  # trailing";
            }
            text += "\n";
            expected.push((tree, consequent));
        }
        (text, expected)
    }
}

fn round_trip(text: &str) -> Result<RuleBase, String> {
    let first = parse_rules(text).map_err(|d| format!("{d:?}\n{text}"))?;
    let printed = pretty_print(&first);
    let second = parse_rules(&printed).map_err(|d| format!("printed text fails to parse: {d:?}\n{printed}"))?;
    ensure(first == second, || format!("re-parse differs\n{text}\n---\n{printed}"))?;
    ensure(pretty_print(&second) == printed, || "printing is not a fixpoint".into())?;
    Ok(first)
}

fn parser_round_trip() -> Result<String, String> {
    let default = round_trip(fsa_core::rules::DEFAULT_RULES)?;
    ensure(default == default_rule_base(), || "default rule base differs".into())?;

    let registry = default_registry();
    let inputs: Vec<(String, Vec<String>)> =
        registry.inputs().iter().map(|v| (v.name().to_string(), v.labels().map(str::to_string).collect())).collect();
    let outputs: Vec<String> = registry.output().labels().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0f5a_2024);
    let mut rules = 0;
    for file in 0..200 {
        let mut writer = RuleWriter { rng: &mut rng, inputs: inputs.clone() };
        let (text, expected) = writer.file(&outputs);
        let parsed = round_trip(&text).map_err(|e| format!("file {file}: {e}"))?;
        ensure(parsed.len() == expected.len(), || format!("file {file}: {} rules, wrote {}", parsed.len(), expected.len()))?;
        for (rule, (tree, label)) in parsed.rules().iter().zip(&expected) {
            ensure(&rule.antecedent == tree && &rule.consequent.label == label, || {
                format!("file {file} rule {}: parsed {:?}, wrote {:?}\n{text}", rule.id, rule.antecedent, tree)
            })?;
        }
        rules += parsed.len();
    }
    Ok(format!("default file plus 200 generated files ({rules} rules) parse, print and re-parse identically"))
}

// Replay

fn fsa(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fsa"))
        .args(args)
        .env_remove("FSA_CLASSIFIER_URL")
        .env_remove("FSA_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    Ok(out.stdout)
}

fn replay_determinism() -> Result<String, String> {
    let path = workspace_file("transcripts/chest_pain_escalation.jsonl");
    let path = path.to_str().unwrap();
    for extra in [&[][..], &["--json"][..]] {
        let args: Vec<&str> = ["replay", path].iter().chain(extra).copied().collect();
        let (a, b) = (fsa(&args)?, fsa(&args)?);
        ensure(!a.is_empty() && a == b, || format!("`fsa {}` output differs between runs", args.join(" ")))?;
    }

    let mut compared = 0;
    for name in ["chest_pain_escalation.jsonl", "chest_pain_good_student.jsonl"] {
        let events = transcript(name);
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open_with(dir.path(), Durability::Buffered).unwrap();
        let sup = Supervisor::default();
        let scenario = Arc::new(chest_pain());
        let record = store.create_session(&scenario.id, events[0].ts).unwrap();
        let mut session = Session::new(&record.session_id, scenario.clone());
        for e in &events {
            sup.handle_event(&mut session, &store, e).map_err(|e| e.to_string())?;
        }
        let entries = store.read_log(&record.session_id).unwrap().entries;
        let live = logged_decisions(&entries).unwrap();
        let replayed: Vec<_> = sup.replay_events(scenario.clone(), &events).unwrap().into_iter().map(|s| s.decision).collect();
        let from_log: Vec<_> =
            sup.replay_log(&record.session_id, scenario, &entries).unwrap().into_iter().map(|s| s.decision).collect();
        ensure(live == replayed, || format!("{name}: live and transcript replay decisions differ"))?;
        ensure(live == from_log, || format!("{name}: live and log replay decisions differ"))?;

        let cli_json = fsa(&["replay", "--json", workspace_file(&format!("transcripts/{name}")).to_str().unwrap()])?;
        let cli: Vec<Value> = String::from_utf8(cli_json)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<Value>(l).unwrap()["decision"].clone())
            .collect();
        let live_json: Vec<Value> = live.iter().map(|d| serde_json::to_value(d).unwrap()).collect();
        ensure(cli == live_json, || format!("{name}: CLI replay decisions differ from the live run"))?;
        compared += live.len();
    }
    Ok(format!("table and JSON traces byte-identical; {compared} live decisions match replay"))
}

// Classifier outage

fn fallback_safety() -> Result<String, String> {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let gw = Gateway::start(Some(dead));

    let mut errors = Vec::new();
    let mut events = 0;
    for name in ["chest_pain_escalation.jsonl", "chest_pain_good_student.jsonl"] {
        let id = gw.create("chest_pain");
        for e in transcript(name) {
            let mut body = json!({ "target": e.target.to_string(), "text": e.text });
            if let Some(action) = &e.action {
                body["action"] = json!(action);
            }
            let (status, reply) = gw.post(&format!("/sessions/{id}/messages"), body);
            events += 1;
            if status != 200 {
                errors.push(format!("{name}: status {status}: {reply}"));
            } else if reply["scores"]["provenance"] != "heuristic" {
                errors.push(format!("{name}: provenance {}", reply["scores"]["provenance"]));
            }
        }
        let (status, report) = gw.post(&format!("/sessions/{id}/close"), json!({}));
        if status != 200 {
            errors.push(format!("{name}: close returned {status}: {report}"));
        }
        let (_, log) = gw.get(&format!("/sessions/{id}/log"));
        let scores: Vec<&Value> = log["entries"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|e| e["kind"] == "scores")
            .map(|e| &e["payload"]["provenance"])
            .collect();
        if scores.iter().any(|p| *p != "heuristic") {
            errors.push(format!("{name}: logged scores are not all heuristic"));
        }
    }
    ensure(errors.is_empty(), || errors.join("; "))?;
    Ok(format!("2 sessions, {events} events, all heuristic, 0 errors"))
}

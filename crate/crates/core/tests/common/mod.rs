#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use lrnlu::dataset::{Domain, Manifest, Sample, Split};
use lrnlu::parse_top;
use lrnlu::top::{Child, Node, NodeKind, NodeLabel, ParseTree, Token, Utterance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

pub const WEATHER_X: &str = "how ' s the weather in sydney";
pub const WEATHER_Y: &str = "[in:get_weather [sl:location sydney ] ]";

const WORDS: &[&str] = &["a", "b", "c", "d", "e", "'", "s", "sydney", "london", "7", "pm"];
const NAMES: &[&str] = &["get_weather", "location", "date_time", "x", "todo", "a1_b2", "z"];

fn random_node<R: Rng>(rng: &mut R, kind: NodeKind, depth: usize, max_depth: usize) -> Node {
    let label = NodeLabel::new(kind, *NAMES.choose(rng).unwrap()).unwrap();
    let arity = rng.gen_range(0..=5);
    let mut children = Vec::with_capacity(arity);
    for _ in 0..arity {
        if depth + 1 < max_depth && rng.gen_bool(0.35) {
            let child_kind = match kind {
                NodeKind::Intent => NodeKind::Slot,
                NodeKind::Slot => NodeKind::Intent,
            };
            let child = random_node(rng, child_kind, depth + 1, max_depth);
            children.push(Child::Node(child));
        } else {
            children.push(Child::Token(Token::new(*WORDS.choose(rng).unwrap()).unwrap()));
        }
    }
    let has_leaf = |c: &[Child]| {
        fn count(c: &[Child]) -> usize {
            c.iter()
                .map(|x| match x {
                    Child::Token(_) => 1,
                    Child::Node(n) => count(n.children()),
                })
                .sum()
        }
        count(c) > 0
    };
    if kind == NodeKind::Slot && !has_leaf(&children) {
        children.push(Child::Token(Token::new(*WORDS.choose(rng).unwrap()).unwrap()));
    }
    Node::new(label, children).unwrap()
}

/// Random valid tree, depth ≤ `max_depth` levels of nodes, arity ≤ 5.
pub fn random_tree<R: Rng>(rng: &mut R, max_depth: usize) -> ParseTree {
    ParseTree::new(random_node(rng, NodeKind::Intent, 0, max_depth)).unwrap()
}

pub fn tree_depth(node: &Node) -> usize {
    1 + node
        .children()
        .iter()
        .filter_map(|c| match c {
            Child::Node(n) => Some(tree_depth(n)),
            Child::Token(_) => None,
        })
        .max()
        .unwrap_or(0)
}

/// Straightforward recursive printer, independent of the library serializer.
pub fn naive_print(node: &Node) -> String {
    let prefix = match node.label().kind() {
        NodeKind::Intent => "in",
        NodeKind::Slot => "sl",
    };
    let mut parts = vec![format!("[{}:{}", prefix, node.label().name())];
    for c in node.children() {
        parts.push(match c {
            Child::Token(t) => t.to_string(),
            Child::Node(n) => naive_print(n),
        });
    }
    parts.push("]".to_string());
    parts.join(" ")
}

pub fn sample(id: &str, domain: Domain, x: &str, y: &str) -> Sample {
    Sample::new(
        id,
        domain,
        Utterance::parse(x).unwrap(),
        parse_top(y).unwrap(),
        Split::Train,
    )
    .unwrap()
}

/// Twenty small weather/reminder training pairs.
pub fn toy_manifest() -> Manifest {
    let rows: &[(&str, &str)] = &[
        (WEATHER_X, WEATHER_Y),
        ("what is the weather in paris", "[in:get_weather [sl:location paris ] ]"),
        (
            "will it rain in london today",
            "[in:get_weather [sl:location london ] [sl:date_time today ] ]",
        ),
        ("weather for tomorrow", "[in:get_weather [sl:date_time tomorrow ] ]"),
        (
            "is it cold in boston",
            "[in:get_weather [sl:weather_attribute cold ] [sl:location boston ] ]",
        ),
        (
            "how hot is it in miami",
            "[in:get_weather [sl:weather_attribute hot ] [sl:location miami ] ]",
        ),
        (
            "forecast in denver this weekend",
            "[in:get_weather [sl:location denver ] [sl:date_time this weekend ] ]",
        ),
        ("what ' s the temperature", "[in:get_weather ]"),
        (
            "do i need an umbrella in seattle",
            "[in:get_weather [sl:weather_attribute umbrella ] [sl:location seattle ] ]",
        ),
        (
            "is it sunny in austin",
            "[in:get_weather [sl:weather_attribute sunny ] [sl:location austin ] ]",
        ),
        (
            "remind me to call mom",
            "[in:create_reminder [sl:person_reminded me ] [sl:todo call mom ] ]",
        ),
        (
            "remind me to buy milk tomorrow",
            "[in:create_reminder [sl:person_reminded me ] [sl:todo buy milk ] [sl:date_time tomorrow ] ]",
        ),
        (
            "set a reminder for 7 pm",
            "[in:create_reminder [sl:date_time for 7 pm ] ]",
        ),
        ("delete my reminders", "[in:delete_reminder [sl:person_reminded my ] ]"),
        (
            "show my reminders for today",
            "[in:get_reminder [sl:person_reminded my ] [sl:date_time for today ] ]",
        ),
        (
            "remind us to water the plants",
            "[in:create_reminder [sl:person_reminded us ] [sl:todo water the plants ] ]",
        ),
        (
            "cancel the reminder about rent",
            "[in:delete_reminder [sl:todo rent ] ]",
        ),
        (
            "remind me in an hour",
            "[in:create_reminder [sl:person_reminded me ] [sl:date_time in an hour ] ]",
        ),
        (
            "any reminders this week",
            "[in:get_reminder [sl:date_time this week ] ]",
        ),
        (
            "remind john to pay bills",
            "[in:create_reminder [sl:person_reminded john ] [sl:todo pay bills ] ]",
        ),
    ];
    let samples = rows
        .iter()
        .enumerate()
        .map(|(i, (x, y))| {
            let domain = if y.contains("reminder") {
                Domain::Reminder
            } else {
                Domain::Weather
            };
            sample(&format!("toy{i:02}"), domain, x, y)
        })
        .collect();
    Manifest::new(samples, "toy").unwrap()
}

pub fn toy_lexicon() -> std::collections::BTreeMap<String, Vec<String>> {
    let mut t = std::collections::BTreeMap::new();
    t.insert("in".to_string(), vec!["london".into(), "tokyo".into()]);
    t.insert("to".to_string(), vec!["email".into(), "visit".into()]);
    t.insert("me".to_string(), vec!["us".into()]);
    t.insert("the".to_string(), vec!["weather".into()]);
    t.insert("^".to_string(), vec!["please".into()]);
    t.insert("*".to_string(), vec!["today".into(), "now".into()]);
    t
}

// ---------------------------------------------------------------------------
// Mock model bridge
// ---------------------------------------------------------------------------

#[derive(Default)]
pub struct BridgeState {
    pub requests: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub peak_in_flight: AtomicUsize,
    /// Answer the next N requests with HTTP 500.
    pub fail_next: AtomicUsize,
    pub unloaded: AtomicBool,
}

pub struct MockBridge {
    pub url: String,
    pub state: Arc<BridgeState>,
}

struct HttpRequest {
    method: String,
    path: String,
    body: Vec<u8>,
}

fn read_request(stream: &mut TcpStream) -> Option<HttpRequest> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut content_length = 0usize;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok()?;
    Some(HttpRequest { method, path, body })
}

fn respond(stream: &mut TcpStream, status: u16, body: &Value) {
    let text = body.to_string();
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        422 => "Unprocessable Entity",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Other",
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
    let _ = stream.flush();
}

/// Deterministic fill rule: left neighbour "in" → cities, otherwise generic words.
fn fill(tokens: &[String], pos: usize, top_k: usize) -> Vec<Value> {
    let left = if pos == 0 { "^" } else { tokens[pos - 1].as_str() };
    let cands: &[(&str, f64)] = match left {
        "in" => &[("London", 0.83), ("tokyo", 0.1), ("paris", 0.05)],
        "the" => &[("weather", 0.5), ("plants", 0.2)],
        _ => &[("today", 0.4), ("now", 0.3)],
    };
    cands
        .iter()
        .take(top_k)
        .map(|(t, s)| json!({"position": pos, "token": t, "score": s}))
        .collect()
}

fn handle(mut stream: TcpStream, state: Arc<BridgeState>, memory: Arc<HashMap<String, String>>) {
    let Some(req) = read_request(&mut stream) else { return };
    state.requests.fetch_add(1, Ordering::SeqCst);
    let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    state.peak_in_flight.fetch_max(now, Ordering::SeqCst);
    thread::sleep(Duration::from_millis(2));

    let reply = |stream: &mut TcpStream, status, body: Value| {
        state.in_flight.fetch_sub(1, Ordering::SeqCst);
        respond(stream, status, &body);
    };

    if state
        .fail_next
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        return reply(&mut stream, 500, json!({"error": "flaky"}));
    }
    if state.unloaded.load(Ordering::SeqCst) {
        return reply(&mut stream, 503, json!({"error": "model not loaded"}));
    }
    match (req.method.as_str(), req.path.as_str()) {
        ("GET", "/v1/health") => reply(
            &mut stream,
            200,
            json!({"status": "ok", "proposer": "mock-mlm", "parser": "mock-parser"}),
        ),
        ("POST", "/v1/fill_mask") => {
            let parsed: Result<lrnlu::oracle::protocol::FillMaskRequest, _> = serde_json::from_slice(&req.body);
            match parsed.ok().filter(|r| r.validate().is_ok()) {
                None => reply(&mut stream, 400, json!({"error": "malformed request"})),
                Some(r) => {
                    let proposals: Vec<Value> = r
                        .mask_positions
                        .iter()
                        .flat_map(|&p| fill(&r.tokens, p, r.top_k))
                        .collect();
                    reply(&mut stream, 200, json!({ "proposals": proposals }))
                }
            }
        }
        ("POST", "/v1/parse") => {
            let parsed: Result<lrnlu::oracle::protocol::ParseRequest, _> = serde_json::from_slice(&req.body);
            match parsed {
                Err(_) => reply(&mut stream, 400, json!({"error": "malformed request"})),
                Ok(r) => {
                    let answer = memory.get(&lrnlu::canonicalize(&r.utterance)).cloned();
                    reply(&mut stream, 200, json!({ "parse": answer }))
                }
            }
        }
        _ => reply(&mut stream, 400, json!({"error": "unknown route"})),
    }
}

/// Starts a bridge whose parser memorizes `memory` (utterance → parse).
pub fn start_mock_bridge(memory: HashMap<String, String>) -> MockBridge {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let state = Arc::new(BridgeState::default());
    let memory = Arc::new(memory);
    let st = state.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let (st, mem) = (st.clone(), memory.clone());
            thread::spawn(move || handle(stream, st, mem));
        }
    });
    MockBridge { url, state }
}

pub fn memory_of(manifest: &Manifest) -> HashMap<String, String> {
    manifest
        .iter()
        .map(|s| (s.utterance().to_string(), s.parse().serialize()))
        .collect()
}

/// Port with nothing listening.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}

// ---------------------------------------------------------------------------
// Dense TF-IDF oracle
// ---------------------------------------------------------------------------

/// Cosine scores of `query` against every doc, computed with dense vectors
/// over a sorted vocabulary.
pub fn dense_tfidf_scores(docs: &[Vec<String>], query: &[String]) -> Vec<f64> {
    let mut vocab: Vec<&str> = docs.iter().flatten().map(String::as_str).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = docs.iter().filter(|d| d.iter().any(|w| w == t)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let dense = |words: &[String]| -> Vec<f64> {
        let mut v: Vec<f64> = vocab
            .iter()
            .zip(&idf)
            .map(|(t, w)| words.iter().filter(|x| x == t).count() as f64 * w)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    };
    let q = dense(query);
    docs.iter()
        .map(|d| dense(d).iter().zip(&q).map(|(a, b)| a * b).sum::<f64>().clamp(0.0, 1.0))
        .collect()
}

/// Ranking by score descending; scores equal up to a few ulps tie and fall
/// back to id ascending.
pub fn oracle_ranking(ids: &[String], scores: &[f64]) -> Vec<String> {
    let quantum = 1024.0 * f64::EPSILON;
    let key = |s: f64| (s / quantum).round() as i64;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| key(scores[b]).cmp(&key(scores[a])).then_with(|| ids[a].cmp(&ids[b])));
    order.into_iter().map(|i| ids[i].clone()).collect()
}

/// Random corpus of `n_docs` documents over a `vocab`-word vocabulary.
pub fn random_corpus<R: Rng>(rng: &mut R, n_docs: usize, vocab: usize) -> Vec<Vec<String>> {
    (0..n_docs)
        .map(|_| {
            let len = rng.gen_range(1..=8);
            (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
        })
        .collect()
}

pub fn corpus_manifest(docs: &[Vec<String>]) -> Manifest {
    let samples = docs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let x = d.join(" ");
            sample(&format!("d{i:03}"), Domain::Weather, &x, &format!("[in:q {x} ]"))
        })
        .collect();
    Manifest::new(samples, "corpus").unwrap()
}

// ---------------------------------------------------------------------------
// Fuzzed manifests
// ---------------------------------------------------------------------------

/// Random sample whose utterance is its leaves with filler words interleaved.
pub fn random_sample<R: Rng>(rng: &mut R, id: String) -> Sample {
    loop {
        let tree: ParseTree = random_tree(rng, 4);
        let mut words: Vec<String> = tree.leaves().iter().map(|t| t.to_string()).collect();
        for _ in 0..rng.gen_range(0..4) {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, ["uh", "the", "please"].choose(rng).unwrap().to_string());
        }
        if words.is_empty() {
            continue;
        }
        let split = *[Split::Train, Split::Valid, Split::Test].choose(rng).unwrap();
        let s = Sample::new(
            id,
            *Domain::ALL.choose(rng).unwrap(),
            Utterance::parse(&words.join(" ")).unwrap(),
            tree,
            split,
        )
        .unwrap();
        let s = if rng.gen_bool(0.3) {
            s.with_audio_path(Some(format!("audio/{}.wav", rng.gen::<u16>())))
        } else {
            s
        };
        return if rng.gen_bool(0.2) {
            s.with_provenance(Some(json!({"source_id": "x", "p": rng.gen::<f64>()})))
        } else {
            s
        };
    }
}

pub fn random_manifest(seed: u64, n: usize, prefix: &str) -> Manifest {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| random_sample(&mut rng, format!("{prefix}{i}")))
        .collect();
    Manifest::new(samples, "fuzz").unwrap()
}

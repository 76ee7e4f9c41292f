use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adsr_eval::audio::{AudioClip, WavFormat};
use adsr_eval::mushra::{blind_label, build_campaign, CampaignItem, MushraCampaign, ScreeningPolicy};
use adsr_eval::service::{export_results, read_log, router, serve, CampaignService, ServiceConfig};
use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

const SYSTEMS: [&str; 3] = ["flowhigh", "hifigan", "mugan"];
const TOKEN: &str = "operator-secret";

struct Fixture {
    dir: TempDir,
    manifest: PathBuf,
}

impl Fixture {
    fn new(items: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let items: Vec<CampaignItem> = (0..items)
            .map(|i| CampaignItem {
                id: format!("p225_{i:03}"),
                reference: AudioClip::from_fn(4800, 48000, |t| {
                    0.4 * (2.0 * std::f64::consts::PI * (300.0 + 50.0 * i as f64) * t).sin()
                })
                .unwrap(),
            })
            .collect();
        let outputs: BTreeMap<String, Vec<AudioClip>> = SYSTEMS
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let gain = 0.5 + 0.1 * k as f64;
                (s.to_string(), items.iter().map(|it| it.reference.scaled(gain).unwrap()).collect())
            })
            .collect();
        let built = build_campaign(&items, &outputs, 2024).unwrap();
        let manifest = built.write(dir.path(), WavFormat::Pcm16).unwrap();
        Self { dir, manifest }
    }

    fn config(&self, log: &str) -> ServiceConfig {
        let mut c = ServiceConfig::new(&self.manifest, self.dir.path().join(log));
        c.operator_token = Some(TOKEN.into());
        c
    }

    fn service(&self, log: &str) -> Arc<CampaignService> {
        Arc::new(CampaignService::open(self.config(log)).unwrap())
    }

    fn log_path(&self, log: &str) -> PathBuf {
        self.dir.path().join(log)
    }
}

fn condition_names(c: &MushraCampaign) -> Vec<String> {
    c.trials[0].conditions.iter().map(|c| c.name.clone()).collect()
}

async fn call(service: &Arc<CampaignService>, req: Request<Body>) -> (StatusCode, HashMap<String, String>, Vec<u8>) {
    let res = router(service.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res
        .headers()
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_str().unwrap_or("").to_string()))
        .collect();
    let body = axum::body::to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, headers, body.to_vec())
}

async fn get_json(service: &Arc<CampaignService>, uri: &str) -> (StatusCode, Value) {
    let (s, _, b) = call(service, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post_json(service: &Arc<CampaignService>, body: &Value) -> (StatusCode, Value) {
    let req = Request::post("/api/response")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, _, b) = call(service, req).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn new_session(service: &Arc<CampaignService>, alias: &str) -> String {
    let (s, v) = get_json(service, &format!("/api/session?alias={alias}")).await;
    assert_eq!(s, StatusCode::OK);
    v["session"].as_str().unwrap().to_string()
}

/// Scores keyed by blind label: hidden reference 100, everything else 40.
fn honest_scores(campaign: &MushraCampaign, session: &str, trial: usize) -> Value {
    let order = campaign.condition_order(session, trial);
    let scores: serde_json::Map<String, Value> = order
        .iter()
        .enumerate()
        .map(|(pos, &c)| {
            let s = if campaign.trials[trial].conditions[c].name == "reference" { 100 } else { 40 };
            (blind_label(pos), json!(s))
        })
        .collect();
    Value::Object(scores)
}

fn string_values(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) => out.push(s.clone()),
        Value::Array(a) => a.iter().for_each(|x| string_values(x, out)),
        Value::Object(m) => m.values().for_each(|x| string_values(x, out)),
        _ => {}
    }
}

fn assert_blind(v: &Value, names: &[String]) {
    let mut strings = Vec::new();
    string_values(v, &mut strings);
    for s in strings {
        for n in names {
            assert!(!s.contains(n.as_str()), "payload value `{s}` leaks `{n}`");
        }
    }
}

fn log_lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[tokio::test]
async fn trial_descriptor_has_six_blind_conditions() {
    let fx = Fixture::new(2);
    let service = fx.service("log.jsonl");
    let names = condition_names(service.campaign());

    let (s, meta) = get_json(&service, "/api/campaign").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(meta["trials"], 2);
    assert_eq!(meta["conditions_per_trial"], 6);
    assert_blind(&meta, &names);

    let session = new_session(&service, "alice").await;
    assert_eq!(session.len(), 32);
    let (s, d) = get_json(&service, &format!("/api/trial/{session}/0")).await;
    assert_eq!(s, StatusCode::OK);
    let labels: Vec<&str> = d["conditions"].as_array().unwrap().iter().map(|c| c["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["A", "B", "C", "D", "E", "F"]);
    assert_eq!(d["scale"], json!({"min": 0, "max": 100, "step": 1}));
    assert_blind(&d, &names);

    let (_, again) = get_json(&service, &format!("/api/trial/{session}/0")).await;
    assert_eq!(d, again);

    assert_eq!(get_json(&service, "/api/trial/ffff/0").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get_json(&service, &format!("/api/trial/{session}/2")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(get_json(&service, &format!("/api/trial/{session}/x")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn response_lifecycle() {
    let fx = Fixture::new(2);
    let service = fx.service("log.jsonl");
    let campaign = service.campaign().clone();
    let names = condition_names(&campaign);
    let session = new_session(&service, "bob").await;
    let order = service.sessions().await[&session].trial_order.clone();
    let log = fx.log_path("log.jsonl");
    let before = log_lines(&log);

    let scores = honest_scores(&campaign, &session, order[0]);
    let body = json!({"session": session, "trial_index": 0, "scores": scores, "client": {"ua": "test"}});

    let mut bad = body.clone();
    bad["scores"]["C"] = json!(150);
    let (s, v) = post_json(&service, &bad).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["reason"], "OutOfRange");
    assert_eq!(v["condition"], "C");

    let mut partial = body.clone();
    partial["scores"].as_object_mut().unwrap().remove("E");
    let (s, v) = post_json(&service, &partial).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["reason"], "Incomplete");
    assert_eq!(v["missing"], json!(["E"]));
    assert_blind(&v, &names);

    let mut unknown = body.clone();
    unknown["scores"]["Q"] = json!(10);
    assert_eq!(post_json(&service, &unknown).await.1["reason"], "UnknownCondition");

    let req = Request::post("/api/response").body(Body::from("{not json")).unwrap();
    let (s, _, b) = call(&service, req).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<Value>(&b).unwrap()["reason"], "BadRequest");

    let mut ghost = body.clone();
    ghost["session"] = json!("00");
    assert_eq!(post_json(&service, &ghost).await.0, StatusCode::NOT_FOUND);

    assert_eq!(log_lines(&log), before, "rejections must not be logged");

    let (s, ack) = post_json(&service, &body).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["cursor"], 1);
    assert_eq!(ack["complete"], false);
    assert_eq!(log_lines(&log), before + 1);

    let (s, v) = post_json(&service, &body).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["reason"], "Duplicate");
    assert_eq!(log_lines(&log), before + 1);

    let (_, d) = get_json(&service, &format!("/api/trial/{session}/0")).await;
    assert_eq!(d["submitted"], true);
}

#[tokio::test]
async fn audio_tokens_serve_wav_with_ranges() {
    let fx = Fixture::new(1);
    let service = fx.service("log.jsonl");
    let session = new_session(&service, "carol").await;
    let (_, d) = get_json(&service, &format!("/api/trial/{session}/0")).await;
    let url = d["conditions"][0]["audio_url"].as_str().unwrap().to_string();

    let (s, h, full) = call(&service, Request::get(&url).body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(&full[..4], b"RIFF");
    assert_eq!(h.get("accept-ranges").map(String::as_str), Some("bytes"));

    let req = Request::get(&url).header(header::RANGE, "bytes=8-15").body(Body::empty()).unwrap();
    let (s, h, part) = call(&service, req).await;
    assert_eq!(s, StatusCode::PARTIAL_CONTENT);
    assert_eq!(part, &full[8..16]);
    assert_eq!(h["content-range"], format!("bytes 8-15/{}", full.len()));

    let reference = d["reference_url"].as_str().unwrap();
    assert_ne!(reference, url);
    assert_eq!(call(&service, Request::get(reference).body(Body::empty()).unwrap()).await.0, StatusCode::OK);
    let (s, _, _) = call(&service, Request::get("/audio/deadbeef.wav").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn results_require_operator_token() {
    let fx = Fixture::new(2);
    let service = fx.service("log.jsonl");
    let campaign = service.campaign().clone();
    for alias in ["a", "b"] {
        let session = new_session(&service, alias).await;
        let order = service.sessions().await[&session].trial_order.clone();
        for (i, &t) in order.iter().enumerate() {
            let body = json!({"session": session, "trial_index": i, "scores": honest_scores(&campaign, &session, t)});
            assert_eq!(post_json(&service, &body).await.0, StatusCode::OK);
        }
    }
    let results = |auth: Option<&str>, q: &str| {
        let mut r = Request::get(format!("/api/results{q}"));
        if let Some(a) = auth {
            r = r.header(header::AUTHORIZATION, a);
        }
        r.body(Body::empty()).unwrap()
    };
    assert_eq!(call(&service, results(None, "")).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&service, results(Some("Bearer nope"), "")).await.0, StatusCode::UNAUTHORIZED);
    let (s, _, b) = call(&service, results(Some(&format!("Bearer {TOKEN}")), "")).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["responses"], 4);
    let stats = v["stats"].as_array().unwrap();
    assert_eq!(stats.len(), 6);
    assert_eq!(stats[0]["condition"], "reference");
    assert_eq!(stats[0]["mean"], 100.0);
    assert_eq!(stats[0]["n"], 4);

    let (s, h, csv) = call(&service, results(Some(&format!("Bearer {TOKEN}")), "?format=csv")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(h["content-type"].starts_with("text/csv"));
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("condition,n,median,q1,q3,mean,ci_low,ci_high\nreference,4,"));
    let on_disk = export_results(fx.log_path("log.jsonl"), &ScreeningPolicy::default()).unwrap();
    assert_eq!(on_disk.stats_csv(), csv);

    let mut cfg = fx.config("other.jsonl");
    cfg.operator_token = None;
    let closed = Arc::new(CampaignService::open(cfg).unwrap());
    assert_eq!(call(&closed, results(Some(&format!("Bearer {TOKEN}")), "")).await.0, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn restart_after_any_log_prefix_matches_replay() {
    let fx = Fixture::new(3);
    let service = fx.service("log.jsonl");
    let campaign = service.campaign().clone();
    let mut snapshots = vec![service.sessions().await];
    let mut sessions = Vec::new();
    for alias in ["x", "y"] {
        sessions.push(new_session(&service, alias).await);
        snapshots.push(service.sessions().await);
    }
    for step in 0..3 {
        for s in &sessions {
            let t = service.sessions().await[s].trial_order[step];
            let body = json!({"session": s, "trial_index": step, "scores": honest_scores(&campaign, s, t)});
            assert_eq!(post_json(&service, &body).await.0, StatusCode::OK);
            snapshots.push(service.sessions().await);
        }
    }
    let text = std::fs::read_to_string(fx.log_path("log.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len() + 1, snapshots.len());
    for k in 0..=lines.len() {
        let name = format!("prefix{k}.jsonl");
        let mut prefix: String = lines[..k].iter().map(|l| format!("{l}\n")).collect();
        if k < lines.len() {
            // A crash mid-append leaves part of the next line behind.
            prefix.push_str(&lines[k][..lines[k].len() / 2]);
        }
        std::fs::write(fx.log_path(&name), prefix).unwrap();
        let restarted = fx.service(&name);
        assert_eq!(restarted.sessions().await, snapshots[k], "prefix {k}");
        assert!(!read_log(fx.log_path(&name)).unwrap().torn_tail);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_are_serialized() {
    let fx = Fixture::new(2);
    let service = fx.service("log.jsonl");
    let campaign = service.campaign().clone();
    let mut sessions = Vec::new();
    for i in 0..16 {
        sessions.push(new_session(&service, &format!("l{i}")).await);
    }
    let mut tasks = Vec::new();
    for s in sessions {
        let service = service.clone();
        let campaign = campaign.clone();
        tasks.push(tokio::spawn(async move {
            let order = service.sessions().await[&s].trial_order.clone();
            for (i, &t) in order.iter().enumerate() {
                let body = json!({"session": s, "trial_index": i, "scores": honest_scores(&campaign, &s, t)});
                assert_eq!(post_json(&service, &body).await.0, StatusCode::OK);
            }
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
    let contents = read_log(fx.log_path("log.jsonl")).unwrap();
    assert_eq!(contents.entries.len(), 16 + 32);
    assert!(contents.entries.windows(2).all(|w| w[0].seq < w[1].seq));
}

#[tokio::test]
async fn static_ui_bundle_is_served() {
    let fx = Fixture::new(1);
    let ui = fx.dir.path().join("ui");
    std::fs::create_dir_all(ui.join("assets")).unwrap();
    std::fs::write(ui.join("index.html"), "<!doctype html><title>mushra</title>").unwrap();
    std::fs::write(ui.join("assets/app.js"), "console.log(1)").unwrap();
    let mut cfg = fx.config("log.jsonl");
    cfg.ui_dir = Some(ui);
    let service = Arc::new(CampaignService::open(cfg).unwrap());
    let (s, _, body) = call(&service, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("mushra"));
    let (s, h, _) = call(&service, Request::get("/assets/app.js").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(h["content-type"].contains("javascript"));
    assert_eq!(get_json(&service, "/api/campaign").await.0, StatusCode::OK);
}

/// A full listener session over a real socket, followed by an export.
#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_item_campaign_over_tcp() {
    let fx = Fixture::new(2);
    let service = fx.service("log.jsonl");
    let campaign = service.campaign().clone();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(service.clone(), listener, async {
        stop_rx.await.ok();
    }));

    let client = reqwest::Client::new();
    let v: Value = client.get(format!("{base}/api/session?alias=web")).send().await.unwrap().json().await.unwrap();
    let session = v["session"].as_str().unwrap().to_string();
    let order = service.sessions().await[&session].trial_order.clone();
    for (i, &t) in order.iter().enumerate() {
        let d: Value = client
            .get(format!("{base}/api/trial/{session}/{i}"))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        for c in d["conditions"].as_array().unwrap() {
            let res = client
                .get(format!("{base}{}", c["audio_url"].as_str().unwrap()))
                .header("Range", "bytes=0-43")
                .send()
                .await
                .unwrap();
            assert_eq!(res.status(), 206);
            assert_eq!(res.bytes().await.unwrap().len(), 44);
        }
        let body = json!({"session": session, "trial_index": i, "scores": honest_scores(&campaign, &session, t)});
        let res = client.post(format!("{base}/api/response")).json(&body).send().await.unwrap();
        assert_eq!(res.status(), 200);
    }
    stop_tx.send(()).unwrap();
    server.await.unwrap().unwrap();

    let export = export_results(fx.log_path("log.jsonl"), &ScreeningPolicy::default()).unwrap();
    assert_eq!(export.responses, 2);
    assert_eq!(export.stats.len(), 6);
    assert!(export.excluded.is_empty());
}

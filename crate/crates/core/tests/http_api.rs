use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::Query;
use axum::routing::get;
use axum::{Json, Router};
use livinglab::client::LabClient;
use livinglab::corpus::{Corpus, HeadQuerySet, Record, RecordKind};
use livinglab::lab::http::router;
use livinglab::lab::{Lab, LabOptions};
use livinglab::site::Site;
use livinglab::systems::{BuiltinRanker, SystemDescriptor, Task};
use serde_json::{json, Value};

fn spawn(app: Router) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

type Params = Query<HashMap<String, String>>;

fn take_k(ids: &[&str], params: &HashMap<String, String>) -> Vec<String> {
    let k: usize = params.get("k").and_then(|k| k.parse().ok()).unwrap_or(10);
    ids.iter().take(k).map(|s| s.to_string()).collect()
}

/// A participant with several personalities, one per path prefix.
fn participant() -> SocketAddr {
    let app = Router::new()
        .route("/good/health", get(|| async { "ok" }))
        .route(
            "/good/ranking",
            get(|Query(p): Params| async move { Json(take_k(&["d3", "d1", "d4"], &p)) }),
        )
        .route(
            "/good/recommendation",
            get(|Query(p): Params| async move { Json(take_k(&["r2", "r1"], &p)) }),
        )
        .route("/garbage/ranking", get(|| async { "this is not json" }))
        .route("/unknown/ranking", get(|| async { Json(vec!["nope"]) }))
        .route("/overlong/ranking", get(|| async { Json(vec!["d1"; 40]) }))
        .route(
            "/pub/recommendation",
            get(|| async { Json(vec!["d1"]) }),
        )
        .route(
            "/slow/ranking",
            get(|| async {
                tokio::time::sleep(Duration::from_secs(2)).await;
                Json(vec!["d1"])
            }),
        );
    spawn(app)
}

fn site() -> Site {
    let mut records: Vec<Record> = (1..=4)
        .map(|i| {
            let mut r = Record::new(format!("d{i}"), RecordKind::Publication, format!("alpha study {i}"));
            r.topics.insert("genetics".into());
            r
        })
        .collect();
    for i in 1..=2 {
        let mut r = Record::new(format!("r{i}"), RecordKind::ResearchData, format!("survey wave {i}"));
        r.topics.insert("genetics".into());
        records.push(r);
    }
    let corpus = Corpus::from_records("desk", records).unwrap();
    let queries = HeadQuerySet::from_pairs([("q1", "alpha")]).unwrap();
    let items = HeadQuerySet::from_pairs([("d1", "d1")]).unwrap();
    Site::new(corpus, queries, items)
}

struct Harness {
    client: LabClient,
}

fn harness(ui_dir: Option<std::path::PathBuf>) -> Harness {
    let participant = format!("http://{}", participant());
    let mut systems = vec![
        SystemDescriptor::builtin("bm25", BuiltinRanker::Bm25),
        SystemDescriptor::builtin("jaccard", BuiltinRanker::TopicJaccard),
        SystemDescriptor::builtin("tfidf", BuiltinRanker::TfidfCosine),
    ];
    for name in ["good", "garbage", "unknown", "overlong", "slow"] {
        systems.push(SystemDescriptor::remote(
            format!("remote-{name}"),
            Task::AdhocRetrieval,
            format!("{participant}/{name}"),
        ));
    }
    systems.push(SystemDescriptor::remote(
        "remote-rec",
        Task::DatasetRecommendation,
        format!("{participant}/good"),
    ));
    systems.push(SystemDescriptor::remote(
        "remote-pub",
        Task::DatasetRecommendation,
        format!("{participant}/pub"),
    ));
    let options = LabOptions {
        snapshot_every: 0,
        remote_timeout: Duration::from_millis(500),
    };
    let lab = Arc::new(Lab::in_memory(vec![site()], systems, options).unwrap());
    let addr = spawn(router(lab, ui_dir));
    Harness {
        client: LabClient::new(&format!("http://{addr}")),
    }
}

fn draft(baseline: &str, candidate: &str) -> Value {
    json!({
        "site_id": "desk",
        "task": "adhoc_retrieval",
        "baseline_system": baseline,
        "candidate_systems": [candidate],
        "method": "team_draft",
        "k": 4,
        "seed": 5
    })
}

fn running(h: &Harness, draft: Value) -> String {
    let (status, body) = h.client.post_text("/api/experiments", &draft).unwrap();
    assert_eq!(status, 201, "{body}");
    let id = serde_json::from_str::<Value>(&body).unwrap()["experiment_id"]
        .as_str()
        .unwrap()
        .to_owned();
    assert_eq!(h.client.post_text(&format!("/api/experiments/{id}/start"), &json!({})).unwrap().0, 200);
    id
}

fn session(h: &Harness, exp: &str) -> (u16, Value) {
    let (status, body) = h
        .client
        .post_text("/api/sessions", &json!({ "experiment_id": exp, "query_id": "q1" }))
        .unwrap();
    (status, serde_json::from_str(&body).unwrap())
}

fn degraded_count(h: &Harness, exp: &str) -> u64 {
    h.client.report(exp).unwrap().profiles[0].degraded_excluded
}

#[test]
fn remote_participant_serves_sessions() {
    let h = harness(None);
    let exp = running(&h, draft("bm25", "remote-good"));
    let (status, body) = session(&h, &exp);
    assert_eq!(status, 201);
    let docs: Vec<String> = serde_json::from_value(body["docs"].clone()).unwrap();
    assert!(docs.contains(&"d3".to_owned()), "{docs:?}");
    assert_eq!(body.as_object().unwrap().len(), 2, "{body}");
    assert_eq!(degraded_count(&h, &exp), 0);
}

#[test]
fn faulty_participants_degrade_to_baseline() {
    let h = harness(None);
    for name in ["garbage", "unknown", "overlong", "slow"] {
        let exp = running(&h, draft("bm25", &format!("remote-{name}")));
        let (status, body) = session(&h, &exp);
        assert_eq!(status, 201, "{name}: {body}");
        session(&h, &exp);
        assert_eq!(degraded_count(&h, &exp), 2, "{name}");
        // Degraded sessions show the baseline ranking whole.
        assert_eq!(body["docs"].as_array().unwrap().len(), 4, "{name}");
        assert!(!body.to_string().contains(name));
    }
}

#[test]
fn down_participant_degrades() {
    let h = harness(None);
    let down = json!({
        "system_id": "remote-down", "task": "adhoc_retrieval", "mode": "remote",
        "address": "http://127.0.0.1:9"
    });
    assert_eq!(h.client.post_text("/api/systems", &down).unwrap().0, 201);
    assert_eq!(h.client.post_text("/api/systems", &down).unwrap().0, 409);
    let exp = running(&h, draft("bm25", "remote-down"));
    let (status, body) = session(&h, &exp);
    assert_eq!(status, 201);
    assert_eq!(body["docs"].as_array().unwrap().len(), 4);
    assert_eq!(degraded_count(&h, &exp), 1);
}

#[test]
fn recommendation_participant_checked_for_kind() {
    let h = harness(None);
    let make = |candidate: &str| {
        json!({
            "site_id": "desk",
            "task": "dataset_recommendation",
            "baseline_system": "jaccard",
            "candidate_systems": [candidate],
            "method": "team_draft",
            "seed": 1
        })
    };
    for (candidate, degraded) in [("remote-rec", 0), ("remote-pub", 1)] {
        let exp = running(&h, make(candidate));
        let (status, body) = h
            .client
            .post_text("/api/sessions", &json!({ "experiment_id": exp, "seed_record": "d1" }))
            .unwrap();
        assert_eq!(status, 201, "{body}");
        let body: Value = serde_json::from_str(&body).unwrap();
        for doc in body["docs"].as_array().unwrap() {
            assert!(doc.as_str().unwrap().starts_with('r'), "{body}");
        }
        assert_eq!(degraded_count(&h, &exp), degraded, "{candidate}");
        // A research-data seed is refused.
        let (status, _) = h
            .client
            .post_text("/api/sessions", &json!({ "experiment_id": exp, "seed_record": "r1" }))
            .unwrap();
        assert_eq!(status, 400);
    }
}

#[test]
fn status_codes() {
    let h = harness(None);
    assert!(h.client.health());
    let c = &h.client;
    assert_eq!(c.post_text("/api/experiments", &draft("bm25", "bm25")).unwrap().0, 400);
    assert_eq!(c.post_text("/api/experiments", &draft("bm25", "ghost")).unwrap().0, 404);
    assert_eq!(c.post_text("/api/experiments", &json!({ "site_id": "desk" })).unwrap().0, 422);
    let mut bad = draft("bm25", "tfidf");
    bad["traffic_fraction_experimental"] = json!(2.0);
    assert_eq!(c.post_text("/api/experiments", &bad).unwrap().0, 400);

    let (status, body) = c.post_text("/api/experiments", &draft("bm25", "tfidf")).unwrap();
    assert_eq!(status, 201);
    let id = serde_json::from_str::<Value>(&body).unwrap()["experiment_id"]
        .as_str()
        .unwrap()
        .to_owned();
    assert_eq!(c.get_text(&format!("/api/experiments/{id}")).unwrap().0, 200);
    assert_eq!(c.get_text("/api/experiments/exp-9999").unwrap().0, 404);
    assert_eq!(c.get_text("/api/experiments/exp-9999/report").unwrap().0, 404);
    let listed: Vec<Value> = serde_json::from_str(&c.get_text("/api/experiments").unwrap().1).unwrap();
    assert_eq!(listed.len(), 1);

    let (status, _) = session(&h, &id);
    assert_eq!(status, 409);
    let traffic = json!({ "traffic_fraction_experimental": 0.2 });
    assert_eq!(c.post_text(&format!("/api/experiments/{id}/traffic"), &traffic).unwrap().0, 400);
    assert_eq!(c.post_text(&format!("/api/experiments/{id}/start"), &json!({})).unwrap().0, 200);
    assert_eq!(c.post_text(&format!("/api/experiments/{id}/start"), &json!({})).unwrap().0, 409);

    let (status, created) = session(&h, &id);
    assert_eq!(status, 201);
    let sid = created["session_id"].as_str().unwrap().to_owned();
    let path = format!("/api/sessions/{sid}/feedback");
    let (status, body) = c.post_text(&path, &json!({ "clicks": [0] })).unwrap();
    assert_eq!((status, body.as_str()), (200, r#"{"status":"recorded"}"#));
    assert_eq!(c.post_text(&path, &json!({ "clicks": [] })).unwrap().0, 409);
    let (status, _) = c.post_text("/api/sessions/zzz/feedback", &json!({ "clicks": [] })).unwrap();
    assert_eq!(status, 404);
    let (_, created) = session(&h, &id);
    let path = format!("/api/sessions/{}/feedback", created["session_id"].as_str().unwrap());
    assert_eq!(c.post_text(&path, &json!({ "clicks": [99] })).unwrap().0, 400);

    assert_eq!(c.post_text(&format!("/api/experiments/{id}/stop"), &json!({})).unwrap().0, 200);
    let (status, body) = c.post_text(&format!("/api/experiments/{id}/start"), &json!({})).unwrap();
    assert_eq!(status, 409);
    assert!(body.contains("terminal state"), "{body}");
    assert_eq!(session(&h, &id).0, 409);

    let report: Value = serde_json::from_str(&c.report_text(&id).unwrap()).unwrap();
    assert_eq!(report["schema_version"], "1");
    assert_eq!(report["profiles"][0]["candidate_system"], "tfidf");
    assert_eq!(report["profiles"][0]["ctr_baseline"], Value::Null);
}

#[test]
fn traffic_on_ab_experiments() {
    let h = harness(None);
    let mut d = draft("bm25", "tfidf");
    d["method"] = json!("ab");
    d["traffic_fraction_experimental"] = json!(0.0);
    let id = running(&h, d);
    let (status, body) = h
        .client
        .post_text(
            &format!("/api/experiments/{id}/traffic"),
            &json!({ "traffic_fraction_experimental": 1.0 }),
        )
        .unwrap();
    assert_eq!(status, 200, "{body}");
    let experiment = h.client.experiment(&id).unwrap();
    assert_eq!(experiment.traffic_fraction_experimental, 1.0);
}

#[test]
fn serves_static_ui() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>lab</h1>").unwrap();
    let h = harness(Some(dir.path().to_path_buf()));
    let (status, body) = h.client.get_text("/ui/index.html").unwrap();
    assert_eq!((status, body.as_str()), (200, "<h1>lab</h1>"));
    let systems = h.client.systems().unwrap();
    assert!(systems.iter().any(|s| s.system_id == "remote-good"));
}

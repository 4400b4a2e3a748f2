use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use reqwest::StatusCode;
use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

async fn start(log: &Path, with_snapshots: bool) -> Server {
    let port = free_port();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pmn-harvest"));
    cmd.args(["review", "serve", "--analysis"])
        .arg(fixture("golden/analysis.json"))
        .arg("--decisions")
        .arg(log)
        .args(["--port", &port.to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::null());
    if with_snapshots {
        cmd.arg("--snapshots")
            .arg(fixture("mesh_2012.json"))
            .arg(fixture("mesh_2013.json"))
            .arg(fixture("mesh_2014.json"));
    }
    let server = Server {
        child: cmd.spawn().unwrap(),
        base: format!("http://127.0.0.1:{port}"),
    };
    for _ in 0..200 {
        if reqwest::get(format!("{}/api/queue", server.base)).await.is_ok() {
            return server;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    panic!("review service did not come up on port {port}");
}

async fn get(server: &Server, path: &str) -> (StatusCode, Value) {
    let resp = reqwest::get(format!("{}{path}", server.base)).await.unwrap();
    let status = resp.status();
    (status, resp.json().await.unwrap())
}

async fn post(server: &Server, body: &Value) -> (StatusCode, Value) {
    let resp = reqwest::Client::new()
        .post(format!("{}/api/decisions", server.base))
        .json(body)
        .send()
        .await
        .unwrap();
    let status = resp.status();
    (status, resp.json().await.unwrap())
}

fn status_of<'a>(queue: &'a Value, ui: &str) -> &'a str {
    queue
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["descriptor_ui"] == ui)
        .unwrap()["status"]
        .as_str()
        .unwrap()
}

#[tokio::test]
async fn queue_and_items() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(&dir.path().join("log.jsonl"), false).await;

    let (status, queue) = get(&server, "/api/queue").await;
    assert_eq!(status, StatusCode::OK);
    let uis: Vec<&str> = queue
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["descriptor_ui"].as_str().unwrap())
        .collect();
    assert_eq!(uis, ["D000067699", "D056931", "D058265", "D065008"]);
    assert!(queue.as_array().unwrap().iter().all(|i| i["status"] == "Pending"));

    let (status, item) = get(&server, "/api/items/D056931").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(item["pmn_text"], "2014; CRYPTOCHROMES was indexed under FLAVOPROTEINS 2005-2013");
    assert_eq!(item["candidates"][0]["scr_ui"], "C063074");
    assert_eq!(item["candidates"][0]["source"], "PartialExact");

    let (status, body) = get(&server, "/api/items/D999999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "UnknownDescriptor");

    let (status, body) = get(&server, "/api/agreement").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"], "SnapshotsNotLoaded");
}

#[tokio::test]
async fn decisions_validate_and_persist() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    {
        let server = start(&log, false).await;

        let (status, body) = post(
            &server,
            &json!({"descriptor_ui": "D999999", "chosen_scr_ui": null, "reviewer": "r"}),
        )
        .await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(body["error"], "UnknownDescriptor");

        let (status, body) = post(
            &server,
            &json!({"descriptor_ui": "D056931", "chosen_scr_ui": "C000001", "reviewer": "r"}),
        )
        .await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(body["error"], "CandidateNotOffered");
        assert!(!log.exists() || std::fs::read_to_string(&log).unwrap().is_empty());

        let resp = reqwest::Client::new()
            .post(format!("{}/api/decisions", server.base))
            .body("{not json")
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

        let (status, item) = post(
            &server,
            &json!({
                "descriptor_ui": "D056931",
                "chosen_scr_ui": "C063074",
                "reviewer": "curator-1",
                "timestamp": "2014-01-10T09:00:00Z"
            }),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED);
        assert_eq!(item["status"], "Decided");
        assert_eq!(item["decision"]["chosen_scr_ui"], "C063074");

        let (status, _) = post(
            &server,
            &json!({"descriptor_ui": "D065008", "chosen_scr_ui": null, "reviewer": "curator-2"}),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED);

        let lines: Vec<Value> = std::fs::read_to_string(&log)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["descriptor_ui"], "D056931");
        assert_eq!(lines[1]["chosen_scr_ui"], Value::Null);
    }

    let server = start(&log, false).await;
    let (_, queue) = get(&server, "/api/queue").await;
    assert_eq!(status_of(&queue, "D056931"), "Decided");
    assert_eq!(status_of(&queue, "D065008"), "Decided");
    assert_eq!(status_of(&queue, "D058265"), "Pending");
    let (_, item) = get(&server, "/api/items/D056931").await;
    assert_eq!(item["decision"]["reviewer"], "curator-1");
}

#[tokio::test]
async fn agreement_reflects_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(&dir.path().join("log.jsonl"), true).await;

    let (status, before) = get(&server, "/api/agreement").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before.as_array().unwrap().len(), 7);

    let (status, _) = post(
        &server,
        &json!({"descriptor_ui": "D056931", "chosen_scr_ui": "C063074", "reviewer": "r"}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);

    let (_, after) = get(&server, "/api/agreement").await;
    let rows = after.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let crypto = rows.iter().find(|a| a["descriptor_ui"] == "D056931").unwrap();
    assert_eq!(crypto["scr_ui"], "C063074");
    assert_eq!(crypto["class"], "Identical");
}

#[tokio::test]
async fn concurrent_posts_are_all_logged() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let server = start(&log, false).await;
    let client = reqwest::Client::new();
    let mut tasks = Vec::new();
    for i in 0..20 {
        let client = client.clone();
        let url = format!("{}/api/decisions", server.base);
        tasks.push(tokio::spawn(async move {
            client
                .post(url)
                .json(&json!({"descriptor_ui": "D058265", "chosen_scr_ui": "C093200", "reviewer": format!("r{i}")}))
                .send()
                .await
                .unwrap()
                .status()
        }));
    }
    for task in tasks {
        assert_eq!(task.await.unwrap(), StatusCode::CREATED);
    }
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 20);
    for line in text.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
}

//! Builds a tiny blinded campaign, serves it on an ephemeral port, completes one
//! session over HTTP and prints the operator results export.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use adsr_eval::audio::{AudioClip, WavFormat};
use adsr_eval::mushra::{build_campaign, CampaignItem};
use adsr_eval::service::{serve, CampaignService, ServiceConfig};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let items: Vec<CampaignItem> = (0..2)
        .map(|i| CampaignItem {
            id: format!("item{i}"),
            reference: AudioClip::from_fn(9600, 48000, |t| 0.3 * (2.0 * PI * (440.0 + 110.0 * i as f64) * t).sin())
                .unwrap(),
        })
        .collect();
    let outputs = BTreeMap::from([(
        "system_a".to_string(),
        items.iter().map(|it| it.reference.scaled(0.7).unwrap()).collect::<Vec<_>>(),
    )]);
    let manifest = build_campaign(&items, &outputs, 7)?.write(dir.path(), WavFormat::Pcm16)?;

    let mut config = ServiceConfig::new(&manifest, dir.path().join("responses.jsonl"));
    config.operator_token = Some("demo-token".into());
    let service = Arc::new(CampaignService::open(config)?);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(service, listener, async {
        stopped.await.ok();
    }));

    let client = reqwest::Client::new();
    println!("campaign: {}", client.get(format!("{base}/api/campaign")).send().await?.text().await?);
    let session: Value = client.get(format!("{base}/api/session?alias=demo")).send().await?.json().await?;
    let id = session["session"].as_str().unwrap_or_default().to_string();
    for index in 0..session["trials"].as_u64().unwrap_or(0) {
        let trial: Value = client.get(format!("{base}/api/trial/{id}/{index}")).send().await?.json().await?;
        let scores: BTreeMap<String, i64> = trial["conditions"]
            .as_array()
            .into_iter()
            .flatten()
            .enumerate()
            .map(|(k, c)| (c["label"].as_str().unwrap_or_default().to_string(), 100 - 3 * k as i64))
            .collect();
        let ack: Value = client
            .post(format!("{base}/api/response"))
            .json(&json!({"session": id, "trial_index": index, "scores": scores}))
            .send()
            .await?
            .json()
            .await?;
        println!("trial {index}: {ack}");
    }
    let results = client
        .get(format!("{base}/api/results?format=csv"))
        .bearer_auth("demo-token")
        .send()
        .await?
        .text()
        .await?;
    println!("{results}");

    stop.send(()).ok();
    server.await??;
    Ok(())
}

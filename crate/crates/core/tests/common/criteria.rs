//! The eight acceptance criteria. Each returns a one-line detail on
//! success and a reason on failure.

use std::collections::BTreeSet;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tagflow::exec::Exec;
use tagflow::ingest::stub_broker::StubBroker;
use tagflow::ingest::{self, AttributeType, BackoffPolicy, ContextAttribute, ContextEntity, ReplayReport, SubscriptionStatus};
use tagflow::mlengine::{ClassifierModel, FeatureVector, LofModel};
use tagflow::synth::{self, Kind, SynthSpec};
use tagflow::Service;

use super::golden;
use super::lof_oracle;
use super::server::{bin, range_job, tag_id, Http, InProcess, ServerProcess};
use super::store_oracle;

pub type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub const REPLICATION_WALL_LIMIT: Duration = Duration::from_secs(60);
pub const REPLICATION_RSS_LIMIT_KIB: u64 = 512 * 1024;
pub const LOF_CASES: usize = 500;
pub const LOF_REL_TOL: f64 = 1e-9;
pub const LOF_TIME_LIMIT: Duration = Duration::from_secs(30);
pub const STORES: usize = 200;
pub const MAX_STORE_ANNOTATIONS: usize = 1000;

/// Every annotation in a paginated query.
pub async fn all_annotations(h: &Http, query: &str) -> Vec<Value> {
    let mut out = Vec::new();
    loop {
        let r = h.get(&format!("/v1/annotations?{query}&offset={}&limit=1000", out.len())).await;
        assert_eq!(r.status, 200, "{}", r.raw);
        let items = r.body["items"].as_array().unwrap().clone();
        let total = r.body["total"].as_u64().unwrap() as usize;
        let done = items.is_empty() || out.len() + items.len() >= total;
        out.extend(items);
        if done {
            return out;
        }
    }
}

/// Synthetic experiment, range[0,50] job, replay at full speed through
/// the real binary.
pub async fn replication() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let synth_dir = dir.path().join("synth");
    let out = Command::new(bin())
        .args(["synth", "--seed", "42", "--out"])
        .arg(&synth_dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "synth failed: {}", String::from_utf8_lossy(&out.stderr));

    let server = ServerProcess::start(&dir.path().join("data"));
    let h = server.http();
    let (domain, job) = range_job(&h, "pm10-levels", 0.0, 50.0).await;
    let jid = job["id"].as_str().unwrap().to_owned();
    let anomalous = tag_id(&domain, "anomalous");
    let train = ingest::read_archive(&synth_dir.join(synth::TRAIN_FILE)).map_err(|e| e.to_string())?;
    let samples: Vec<Value> = train.iter().map(|o| json!({"value": o.value})).collect();
    let r = h.post(&format!("/v1/jobs/{jid}/train"), &json!({"samples": samples})).await;
    ensure!(r.status == 200, "train: {}", r.raw);
    let r = h.post(&format!("/v1/jobs/{jid}/start"), &Value::Null).await;
    ensure!(r.status == 200, "start: {}", r.raw);

    let stream_path = synth_dir.join(synth::STREAM_FILE);
    let started = Instant::now();
    let out = Command::new(bin())
        .args(["replay", "--rate", "0", "--job", &jid, "--addr", &server.addr])
        .arg(&stream_path)
        .output()
        .map_err(|e| e.to_string())?;
    let wall = started.elapsed();
    ensure!(out.status.success(), "replay failed: {}", String::from_utf8_lossy(&out.stderr));
    let report: ReplayReport = serde_json::from_slice(&out.stdout).map_err(|e| format!("report: {e}"))?;

    let stream = ingest::read_archive(&stream_path).map_err(|e| e.to_string())?;
    let expected: BTreeSet<(String, String)> = stream
        .iter()
        .filter(|o| o.value.is_some_and(|v| !(0.0..=50.0).contains(&v)))
        .map(|o| (o.entity_id.clone(), tagflow::time::format(&o.timestamp)))
        .collect();
    let got = all_annotations(&h, &format!("tag={anomalous}")).await;
    let in_band = got
        .iter()
        .filter(|a| a["numeric_value"].as_f64().is_some_and(|v| (0.0..=50.0).contains(&v)))
        .count();
    let got_keys: BTreeSet<(String, String)> = got
        .iter()
        .map(|a| (a["entity_id"].as_str().unwrap().to_owned(), a["time_from"].as_str().unwrap().to_owned()))
        .collect();
    let metrics = h.get("/v1/metrics").await.body;
    let rss = server.peak_rss_kib();

    let count = report.annotations.get("anomalous").copied().unwrap_or(0);
    ensure!(report.observations == 40000, "replayed {} observations", report.observations);
    ensure!(count == 3200, "anomalous annotations {count}, expected 3200");
    ensure!(got.len() == 3200 && got_keys == expected, "annotated set differs from the out-of-band rows");
    ensure!(in_band == 0, "{in_band} in-band false positives");
    ensure!(metrics["observations_ingested"] == 40000, "ingested counter {}", metrics["observations_ingested"]);
    ensure!(wall < REPLICATION_WALL_LIMIT, "replay took {wall:?}");
    let rss = rss.ok_or("peak RSS unavailable")?;
    ensure!(rss < REPLICATION_RSS_LIMIT_KIB, "peak RSS {rss} KiB");
    Ok(format!(
        "anomalous=3200 false_positives=0 replay_wall={:.2}s peak_rss={:.1}MiB",
        wall.as_secs_f64(),
        rss as f64 / 1024.0
    ))
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, grid: bool, span: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            if grid {
                rng.random_range(0..8) as f64
            } else {
                rng.random_range(-span..span)
            }
        })
        .collect()
}

pub fn lof_oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_d10f);
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut scored = 0usize;
    for case in 0..LOF_CASES {
        let n = rng.random_range(20..=200);
        let dim = rng.random_range(1..=3);
        let k = rng.random_range(2..=10);
        // Every fourth case sits on an integer grid so distance ties occur.
        let grid = case % 4 == 3;
        let mut pts: Vec<Vec<f64>> = (0..n).map(|_| random_point(&mut rng, dim, grid, 10.0)).collect();
        if case % 5 == 0 {
            let dup = pts[0].clone();
            pts[1] = dup.clone();
            pts[2] = dup;
        }
        let mut model = LofModel::new(k, dim, None).map_err(|e| e.to_string())?;
        let fvs: Vec<FeatureVector> = pts.iter().map(|p| FeatureVector::new(p.clone()).unwrap()).collect();
        model.lof_train(&fvs).map_err(|e| e.to_string())?;
        let mut queries: Vec<Vec<f64>> = (0..3).map(|_| random_point(&mut rng, dim, grid, 15.0)).collect();
        queries.push(pts[rng.random_range(0..n)].clone());
        queries.push(vec![50.0; dim]);
        let oracle = lof_oracle::Oracle::new(&pts, k);
        for q in &queries {
            let got = model.lof_score(&FeatureVector::new(q.clone()).unwrap()).map_err(|e| e.to_string())?;
            let want = oracle.lof(q);
            let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            scored += 1;
            ensure!(
                rel <= LOF_REL_TOL,
                "case {case} (n={n} dim={dim} k={k}) q={q:?}: got {got}, oracle {want}, rel {rel:e}"
            );
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < LOF_TIME_LIMIT, "suite took {elapsed:?}");
    Ok(format!(
        "{LOF_CASES} cases / {scored} queries, max rel err {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

/// Nearest-rank percentile.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn lof_discrimination() -> Verdict {
    let data = synth::generate(&SynthSpec::default()).map_err(|e| e.to_string())?;
    let mut model = LofModel::new(5, 1, None).map_err(|e| e.to_string())?;
    let train: Vec<FeatureVector> = data
        .train
        .iter()
        .map(|o| FeatureVector::scalar(o.value.unwrap()).unwrap())
        .collect();
    model.lof_train(&train).map_err(|e| e.to_string())?;
    let queries: Vec<FeatureVector> = data
        .stream
        .iter()
        .map(|o| FeatureVector::scalar(o.value.unwrap()).unwrap())
        .collect();
    let scores: Vec<f64> = model
        .score_batch(&queries, Exec::Parallel)
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut nominal: Vec<f64> = Vec::new();
    let mut anomalies: Vec<f64> = Vec::new();
    for (s, k) in scores.iter().zip(&data.kinds) {
        match k {
            Kind::Nominal => nominal.push(*s),
            Kind::Negative | Kind::High => anomalies.push(*s),
        }
    }
    nominal.sort_by(f64::total_cmp);
    let p99 = percentile(&nominal, 0.99);
    let weakest = anomalies.iter().copied().fold(f64::INFINITY, f64::min);
    ensure!(anomalies.len() == 3200, "{} anomalies in stream", anomalies.len());
    ensure!(weakest > p99, "weakest anomaly score {weakest} <= in-band p99 {p99}");
    Ok(format!("in-band p99={p99:.4} < min anomaly score={weakest:.4} over 3200 anomalies"))
}

pub fn classifier() -> Verdict {
    // Worked trace: one example ([1], "b") from zero weights.
    let mut m = ClassifierModel::new(vec!["a".into(), "b".into()], 1).map_err(|e| e.to_string())?;
    let x = FeatureVector::scalar(1.0).unwrap();
    m.classifier_train(&[(x.clone(), "b".into())], 1).map_err(|e| e.to_string())?;
    ensure!(m.weights("b") == Some(&[1.0, 1.0][..]), "w_b = {:?}", m.weights("b"));
    ensure!(m.weights("a") == Some(&[-1.0, -1.0][..]), "w_a = {:?}", m.weights("a"));
    let pred = m.classifier_predict(&x).map_err(|e| e.to_string())?;
    ensure!(pred == ("b".to_owned(), 4.0), "predict [1] = {pred:?}");

    // Three well-separated discs: centres at least 8 apart, radius 2.5.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centres = [("east", 8.0, 0.0), ("north", 4.0, 7.0), ("west", 0.0, 0.0)];
    let mut data: Vec<(FeatureVector, String)> = Vec::new();
    for (label, cx, cy) in centres {
        while data.iter().filter(|(_, l)| l == label).count() < 100 {
            let (dx, dy) = (rng.random_range(-2.5..2.5f64), rng.random_range(-2.5..2.5f64));
            if dx.hypot(dy) <= 2.5 {
                data.push((FeatureVector::new(vec![cx + dx, cy + dy]).unwrap(), label.to_owned()));
            }
        }
    }
    data.shuffle(&mut rng);
    let classes = centres.iter().map(|c| c.0.to_owned()).collect();
    let mut m = ClassifierModel::new(classes, 2).map_err(|e| e.to_string())?;
    for epoch in 1..=10 {
        m.classifier_train(&data, 1).map_err(|e| e.to_string())?;
        let correct = data
            .iter()
            .filter(|(x, y)| m.classifier_predict(x).map(|(c, _)| &c == y).unwrap_or(false))
            .count();
        if correct == data.len() {
            return Ok(format!("trace exact; 300/300 training accuracy after {epoch} epoch(s)"));
        }
    }
    Err("training accuracy below 100% after 10 epochs".into())
}

pub fn store_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57_0e);
    let mut queries = 0;
    let mut annotations = 0;
    for i in 0..STORES {
        let s = store_oracle::random_store(&mut rng, MAX_STORE_ANNOTATIONS);
        annotations += s.annotations.len();
        for _ in 0..20 {
            let f = store_oracle::random_filter(&mut rng, &s);
            let got = s.store.query_annotations(&f).map_err(|e| e.to_string())?;
            let want = store_oracle::scan_annotations(&s, &f);
            ensure!(got == want, "store {i}: query {f:?} returned {} vs oracle {}", got.len(), want.len());
            let (clauses, window, bbox) = store_oracle::random_clauses(&mut rng, &s);
            let got = s
                .store
                .conjunctive_entity_query(&clauses, &window, bbox.as_ref())
                .map_err(|e| e.to_string())?;
            let want = store_oracle::scan_entities(&s, &clauses, &window, bbox.as_ref());
            ensure!(got == want, "store {i}: entities {clauses:?} gave {got:?} vs oracle {want:?}");
            queries += 2;
        }
    }
    Ok(format!("{STORES} stores, {annotations} annotations, {queries} queries equal"))
}

fn pm10_entity(i: usize, value: f64) -> ContextEntity {
    ContextEntity {
        id: format!("urn:sensor:pm10-{:02}", i % 6 + 1),
        entity_type: "AirQualityObserved".into(),
        attributes: vec![
            ContextAttribute {
                name: "pm10".into(),
                attr_type: AttributeType::Number,
                value: json!(value),
                timestamp: Some(format!("2016-03-01T{:02}:{:02}:00Z", i / 60, i % 60)),
                location: None,
            },
            ContextAttribute {
                name: "no2".into(),
                attr_type: AttributeType::Number,
                value: json!(99.0),
                timestamp: None,
                location: None,
            },
        ],
    }
}

/// Value of the i-th published reading; every tenth is above the limit
/// and every tenth (offset 5) is negative.
fn broker_value(i: usize) -> f64 {
    match i % 10 {
        0 => 60.0 + i as f64,
        5 => -1.0 - i as f64 / 100.0,
        _ => 10.0 + (i % 30) as f64,
    }
}

pub async fn broker_flow() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let svc = Arc::new(Service::open(dir.path()).map_err(|e| e.to_string())?);
    let server = InProcess::start(svc.clone()).await;
    let broker = StubBroker::start().await.map_err(|e| e.to_string())?;
    let h = server.http();
    let (domain, job) = range_job(&h, "broker-levels", 0.0, 50.0).await;
    let jid = job["id"].as_str().unwrap().to_owned();
    let anomalous = tag_id(&domain, "anomalous");
    let r = h.post(&format!("/v1/jobs/{jid}/train"), &json!({"samples": []})).await;
    ensure!(r.status == 200, "train: {}", r.raw);
    let r = h.post(&format!("/v1/jobs/{jid}/start"), &Value::Null).await;
    ensure!(r.status == 200, "start: {}", r.raw);

    let req = json!({
        "broker_url": broker.url(),
        "query": {"entity_type": "AirQualityObserved", "id_pattern": "urn:sensor:pm10-*", "attribute": "pm10"},
    });
    let first = h.post("/v1/subscriptions", &req).await;
    let second = h.post("/v1/subscriptions", &req).await;
    ensure!(first.status == 201 && second.status == 201, "subscribe: {} / {}", first.raw, second.raw);
    ensure!(first.body["status"] == "active", "subscription not active: {}", first.raw);
    ensure!(first.body["id"] == second.body["id"], "duplicate subscribe created a second subscription");
    ensure!(broker.subscription_count() == 1, "broker holds {} subscriptions", broker.subscription_count());

    let mut delivered = 0;
    for i in 0..100 {
        delivered += broker.publish(&pm10_entity(i, broker_value(i))).await;
    }
    ensure!(delivered == 100, "{delivered} notifications delivered");
    let got = all_annotations(&h, &format!("tag={anomalous}")).await;
    let got: BTreeSet<(String, String)> = got
        .iter()
        .map(|a| (a["entity_id"].as_str().unwrap().to_owned(), a["numeric_value"].to_string()))
        .collect();
    let want: BTreeSet<(String, String)> = (0..100)
        .filter(|i| !(0.0..=50.0).contains(&broker_value(*i)))
        .map(|i| (pm10_entity(i, 0.0).id, json!(broker_value(i)).to_string()))
        .collect();
    ensure!(got == want, "annotations {got:?} differ from expected {want:?}");
    let metrics = h.get("/v1/metrics").await.body;
    ensure!(metrics["observations_ingested"] == 100, "ingested {}", metrics["observations_ingested"]);

    let backoff = backoff_under_outage(&broker).await?;
    Ok(format!(
        "100 notifications -> {} annotations as expected; duplicate subscribe idempotent; {backoff}",
        want.len()
    ))
}

/// Broker outage: retries back off and stay within the cap, then recover.
async fn backoff_under_outage(broker: &StubBroker) -> Verdict {
    let default = BackoffPolicy::default();
    let worst = (0..10_000).map(|n| default.delay(n)).max().unwrap();
    ensure!(worst <= Duration::from_secs(60), "default backoff reaches {worst:?}");
    ensure!(default.delay(10) == Duration::from_secs(60), "default backoff never reaches its cap");

    // Same schedule scaled down 50x so the test runs quickly.
    let policy = BackoffPolicy {
        initial: Duration::from_millis(20),
        cap: Duration::from_millis(1200),
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let svc = Arc::new(Service::open_with(dir.path(), policy).map_err(|e| e.to_string())?);
    let server = InProcess::start(svc.clone()).await;
    let h = server.http();
    broker.set_available(false);
    let r = h
        .post(
            "/v1/subscriptions",
            &json!({"broker_url": broker.url(), "query": {"id_pattern": "urn:sensor:*", "attribute": "no2"}}),
        )
        .await;
    ensure!(r.status == 201 && r.body["status"] == "failed", "outage subscribe: {}", r.raw);
    let sid = tagflow::ids::SubscriptionId::from(r.body["id"].as_str().unwrap());
    tokio::time::sleep(Duration::from_millis(4500)).await;
    let times = svc.subscriptions.attempt_times(&sid);
    let gaps: Vec<Duration> = times.windows(2).map(|w| w[1] - w[0]).collect();
    broker.set_available(true);
    let deadline = Instant::now() + Duration::from_secs(5);
    while svc.subscriptions.get(&sid).map(|s| s.status) != Some(SubscriptionStatus::Active) {
        ensure!(Instant::now() < deadline, "subscription did not recover after the outage");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    let slack = Duration::from_millis(250);
    ensure!(gaps.len() >= 5, "only {} retries during the outage", gaps.len());
    let max_gap = gaps.iter().max().copied().unwrap();
    ensure!(max_gap <= policy.cap + slack, "gap {max_gap:?} exceeds the cap");
    ensure!(
        gaps.windows(2).all(|w| w[1] + Duration::from_millis(15) >= w[0]),
        "gaps shrink: {gaps:?}"
    );
    Ok(format!(
        "default backoff max 60s; scaled outage: {} retries, max gap {}ms (cap {}ms + 250ms slack), recovered",
        gaps.len(),
        max_gap.as_millis(),
        policy.cap.as_millis()
    ))
}

/// GET paths compared before and after the restart.
fn durable_paths(did: &str, jid: &str, tag: &str, first_ann: &str) -> Vec<String> {
    vec![
        "/v1/tagdomains".into(),
        format!("/v1/tagdomains/{did}"),
        format!("/v1/tagdomains/{did}/suggest?seeds={tag}"),
        "/v1/jobs".into(),
        format!("/v1/jobs/{jid}"),
        "/v1/annotations?limit=1000".into(),
        format!("/v1/annotations?tag={tag}&limit=1000"),
        format!("/v1/annotations/{first_ann}"),
        format!("/v1/annotations/entities?tags={tag}"),
        "/v1/subscriptions".into(),
    ]
}

pub async fn durability() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let server = ServerProcess::start(&data);
    let h = server.http();
    let (domain, job) = range_job(&h, "durable-levels", 0.0, 50.0).await;
    let did = domain["id"].as_str().unwrap().to_owned();
    let jid = job["id"].as_str().unwrap().to_owned();
    let anomalous = tag_id(&domain, "anomalous");
    let normal = tag_id(&domain, "normal");
    let r = h.post("/v1/tags/relate", &json!({"tag_a": anomalous, "tag_b": normal})).await;
    ensure!(r.status == 200, "relate: {}", r.raw);
    let r = h.post(&format!("/v1/jobs/{jid}/train"), &json!({"samples": [{"value": 1.0}]})).await;
    ensure!(r.status == 200, "train: {}", r.raw);
    let r = h.post(&format!("/v1/jobs/{jid}/start"), &Value::Null).await;
    ensure!(r.status == 200, "start: {}", r.raw);

    let mut first_ann = String::new();
    for i in 0..50 {
        let tag = if i % 2 == 0 { &anomalous } else { &normal };
        let r = h
            .send(
                reqwest::Method::POST,
                "/v1/annotations",
                Some(&json!({
                    "entity_id": format!("urn:sensor:pm10-{:02}", i % 7),
                    "attribute": "pm10",
                    "tag_id": tag,
                    "time_from": format!("2016-03-01T{:02}:00:00.250Z", i % 24),
                    "time_to": format!("2016-03-01T{:02}:30:00Z", i % 24),
                    "location": {"lat": 51.5 + i as f64 / 1000.0, "lon": -0.1},
                    "numeric_value": 0.1 * i as f64,
                    "text_value": format!("note {i}"),
                    "confidence": 0.5,
                })),
                &[("X-Annotator", "inspector")],
            )
            .await;
        ensure!(r.status == 201, "annotation {i}: {}", r.raw);
        if i == 0 {
            first_ann = r.body["id"].as_str().unwrap().to_owned();
        }
    }
    let obs = json!({"data": [
        {"id": "urn:sensor:pm10-01", "type": "AirQualityObserved", "attributes": [
            {"name": "pm10", "type": "Number", "value": 75.5, "timestamp": "2016-03-02T00:00:00Z"}]},
        {"id": "urn:sensor:pm10-02", "type": "AirQualityObserved", "attributes": [
            {"name": "pm10", "type": "Number", "value": 20.0, "timestamp": "2016-03-02T00:01:00Z"}]}
    ]});
    let r = h.post("/v1/observations", &obs).await;
    ensure!(r.status == 202, "observations: {}", r.raw);

    let paths = durable_paths(&did, &jid, &anomalous, &first_ann);
    let mut before = Vec::new();
    for p in &paths {
        before.push(h.get(p).await.raw);
    }
    let count_before = h.get("/v1/annotations?limit=0").await.body["total"].clone();
    server.kill_hard();

    let server = ServerProcess::start(&data);
    let h = server.http();
    for (p, b) in paths.iter().zip(&before) {
        let after = h.get(p).await.raw;
        ensure!(&after == b, "GET {p} differs after restart:\nbefore {b}\nafter  {after}");
    }
    // The restored job keeps running and annotating.
    let r = h.post("/v1/observations", &obs).await;
    ensure!(r.status == 202, "observations after restart: {}", r.raw);
    let count_after = h.get("/v1/annotations?limit=0").await.body["total"].clone();
    ensure!(
        count_after.as_u64() == count_before.as_u64().map(|c| c + 1),
        "restored job did not resume: {count_before} -> {count_after}"
    );
    Ok(format!(
        "{} GET responses byte-identical after SIGKILL + restart ({count_before} annotations)",
        paths.len()
    ))
}

pub async fn http_golden() -> Verdict {
    let suite = golden::run().await;
    let failures = suite.failures();
    if let Some(f) = failures.first() {
        return Err(format!(
            "{} of {} checks failed; first: {} [{}]: {}",
            failures.len(),
            suite.checks.len(),
            f.endpoint,
            f.name,
            f.outcome.as_ref().unwrap_err()
        ));
    }
    let uncovered = suite.uncovered();
    ensure!(uncovered.is_empty(), "endpoints without success+failure goldens: {uncovered:?}");
    Ok(format!(
        "{} checks over {} endpoints, each with success and failure cases",
        suite.checks.len(),
        golden::ENDPOINTS.len()
    ))
}

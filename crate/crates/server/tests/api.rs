use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use screenwise_core::bundled::{self, crc_network};
use screenwise_core::info::{linear_grid, v_info_curve};
use screenwise_core::par::Exec;
use screenwise_core::policy::{recommendation_report, EvalOptions};
use screenwise_core::population::{
    allocate, generate_population, simulate, AllocationMode, OperationalLimits, StrategyCache,
};
use screenwise_core::preference::{PreferenceOverrides, Transcript};
use screenwise_core::screening::default_catalog;
use screenwise_core::{InterventionId, PreferenceParams};
use screenwise_server::{router, AppState, ServerConfig};

struct Api {
    app: axum::Router,
    dir: tempfile::TempDir,
}

impl Api {
    fn new() -> Self {
        Self::with(|_| {})
    }

    fn with(f: impl FnOnce(&mut ServerConfig)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServerConfig {
            work_dir: dir.path().to_owned(),
            workers: 2,
            ..Default::default()
        };
        f(&mut config);
        let state = Arc::new(AppState::new(&config).unwrap());
        Self {
            app: router(state),
            dir,
        }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call("POST", uri, Some(body)).await
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call("GET", uri, None).await
    }
}

fn benchmark_evidence() -> Value {
    serde_json::to_value(bundled::profile("benchmark").unwrap()).unwrap()
}

#[tokio::test]
async fn posterior_matches_library() {
    let api = Api::new();
    let (s, v) = api.post("/v1/posterior", benchmark_evidence()).await;
    assert_eq!(s, StatusCode::OK);
    let want = crc_network()
        .posterior_crc(&bundled::profile("benchmark").unwrap())
        .unwrap();
    assert_eq!(v["pCrc"].as_f64().unwrap(), want);
    assert!((want - 0.00085).abs() < 5e-6);
    assert_eq!(v["entropy"].as_f64().unwrap(), screenwise_core::info::entropy(want));

    let (s, v) = api.post("/v1/posterior", json!({ "priorOverride": 0.1 })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["pCrc"], json!(0.1));
}

#[tokio::test]
async fn posterior_rejects_bad_evidence() {
    let api = Api::new();
    let (s, v) = api
        .post("/v1/posterior", json!({ "assignments": { "Shoesize": "large" } }))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["message"].as_str().unwrap().contains("Shoesize"));

    let (s, _) = api
        .post("/v1/posterior", json!({ "assignments": { "Age": "200+" } }))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn contradictory_evidence_is_unprocessable() {
    let model = json!({
        "target": "CRC",
        "target_state": "yes",
        "variables": [
            { "name": "Gate", "states": ["off", "on"], "cpt": [1.0, 0.0] },
            { "name": "CRC", "states": ["no", "yes"], "parents": ["Gate"], "cpt": [0.99, 0.01, 0.5, 0.5] }
        ]
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, model.to_string()).unwrap();
    let api = Api::with(|c| c.model_path = Some(path.clone()));
    let (s, v) = api
        .post("/v1/posterior", json!({ "assignments": { "Gate": "on" } }))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (s, v) = api
        .post("/v1/posterior", json!({ "assignments": { "Gate": "off" } }))
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["pCrc"], json!(0.01));
}

#[tokio::test]
async fn recommend_is_the_library_report() {
    let api = Api::new();
    let p = crc_network()
        .posterior_crc(&bundled::profile("benchmark").unwrap())
        .unwrap();
    let cat = default_catalog();

    let (s, v) = api
        .post("/v1/recommend", json!({ "evidence": benchmark_evidence() }))
        .await;
    assert_eq!(s, StatusCode::OK);
    let want = recommendation_report(p, &cat, &PreferenceParams::default(), None, EvalOptions::default()).unwrap();
    assert_eq!(v, serde_json::to_value(&want).unwrap());
    assert_eq!(v["strategies"][0]["strategy"]["screening"], json!("NoScreening"));
    assert!((v["strategies"][0]["expected_utility"].as_f64().unwrap() - 0.143).abs() < 0.01);

    let (s, v) = api
        .post(
            "/v1/recommend",
            json!({ "pCrc": p, "overrides": { "rho": 0.005 }, "topK": 1 }),
        )
        .await;
    assert_eq!(s, StatusCode::OK);
    let params = PreferenceOverrides {
        rho: Some(0.005),
        ..Default::default()
    }
    .apply(&PreferenceParams::default())
    .unwrap();
    let want = recommendation_report(p, &cat, &params, Some(1), EvalOptions::default()).unwrap();
    assert_eq!(v, serde_json::to_value(&want).unwrap());
    assert_eq!(v["strategies"].as_array().unwrap().len(), 1);
    assert_eq!(v["strategies"][0]["strategy"]["screening"], json!("FIT"));
    assert!((v["strategies"][0]["expected_utility"].as_f64().unwrap() - 0.147).abs() < 0.01);
}

#[tokio::test]
async fn recommend_validates_input() {
    let api = Api::new();
    let (s, _) = api.post("/v1/recommend", json!({})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api
        .post(
            "/v1/recommend",
            json!({ "pCrc": 0.1, "evidence": benchmark_evidence() }),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.post("/v1/recommend", json!({ "pCrc": 1.5 })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = api
        .post(
            "/v1/recommend",
            json!({ "pCrc": 0.1, "overrides": { "lambdas": { "9": 1.0 } } }),
        )
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn transcript_replay_matches_library() {
    let api = Api::new();
    let t = Transcript::from_json_str(bundled::SAMPLE_TRANSCRIPT_JSON).unwrap();
    let questions: Vec<_> = t.records.iter().map(|r| r.question()).collect();
    let (s, v) = api
        .post(
            "/v1/elicitation/sessions",
            json!({ "questions": questions, "lambda4": t.lambda4 }),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    let id = v["id"].as_str().unwrap().to_owned();
    let uri = format!("/v1/elicitation/sessions/{id}/answers");

    let (s, _) = api.get(&format!("/v1/elicitation/sessions/{id}/result")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    for (i, r) in t.records.iter().enumerate() {
        let (s, v) = api
            .post(
                &uri,
                json!({ "index": i, "preferred": r.preferred, "indifferenceCost": r.indifference_cost }),
            )
            .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        assert_eq!(v["complete"], json!(i + 1 == t.records.len()));
    }
    let (s, _) = api.post(&uri, json!({ "pe": 0.7 })).await;
    assert_eq!(s, StatusCode::OK);

    let (s, v) = api.get(&format!("/v1/elicitation/sessions/{id}/result")).await;
    assert_eq!(s, StatusCode::OK);
    let want = Transcript { pe: Some(0.7), ..t }
        .replay(&PreferenceParams::default())
        .unwrap();
    assert_eq!(v, serde_json::to_value(&want).unwrap());
    let rho = v["calibration"]["rho"].as_f64().unwrap();
    assert!((rho - 0.039).abs() < 0.002, "{rho}");
}

#[tokio::test]
async fn answers_are_strictly_sequential() {
    let api = Api::new();
    let (s, v) = api.post("/v1/elicitation/sessions", json!({ "comfortLevel": 3 })).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["questions"], json!(6));
    let q = &v["next"]["question"];
    assert_eq!(q["comfort"], json!(3));
    let id = v["id"].as_str().unwrap().to_owned();
    let uri = format!("/v1/elicitation/sessions/{id}/answers");

    let (s, _) = api
        .post(&uri, json!({ "index": 1, "preferred": "a", "indifferenceCost": 1.0 }))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);

    // gFOBT vs FIT: FIT preferred, gFOBT's price lowered. At or above its
    // stated price is not an indifference point.
    let (s, v) = api
        .post(&uri, json!({ "index": 0, "preferred": "b", "indifferenceCost": 500.0 }))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (s, v) = api
        .post(&uri, json!({ "index": 0, "preferred": "b", "indifferenceCost": 3.0 }))
        .await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["lambda"].as_f64().unwrap() > 0.0);
    assert_eq!(v["next"]["index"], json!(1));

    let (s, _) = api
        .post(&uri, json!({ "index": 0, "preferred": "b", "indifferenceCost": 3.0 }))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = api
        .post("/v1/elicitation/sessions/nope/answers", json!({ "pe": 0.5 }))
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn default_session_asks_every_level() {
    let api = Api::new();
    let (s, v) = api.post("/v1/elicitation/sessions", json!({})).await;
    assert_eq!(s, StatusCode::CREATED);
    // Colonoscopy with a synthetic option, CTC vs CC, and six level-3 pairs.
    assert_eq!(v["questions"], json!(8));
    assert_eq!(v["next"]["question"]["b"]["cost"], Value::Null);
}

async fn wait_for(api: &Api, id: &str) -> (Value, Vec<String>) {
    let mut seen = Vec::new();
    for _ in 0..6000 {
        let (s, v) = api.get(&format!("/v1/allocations/{id}")).await;
        assert_eq!(s, StatusCode::OK);
        let status = v["status"].as_str().unwrap().to_owned();
        if seen.last() != Some(&status) {
            seen.push(status.clone());
        }
        if status == "done" || status == "failed" {
            return (v, seen);
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("job {id} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn allocation_job_matches_library() {
    let api = Api::new();
    let (s, v) = api
        .post(
            "/v1/allocations",
            json!({
                "population": { "generate": { "size": 20000, "seed": 4 } },
                "limits": OperationalLimits::reference(),
                "runs": 5,
                "seed": 9
            }),
        )
        .await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let id = v["id"].as_str().unwrap().to_owned();
    let (v, _) = wait_for(&api, &id).await;
    assert_eq!(v["status"], json!("done"), "{}", v["error"]);

    let net = crc_network();
    let cat = default_catalog();
    let mut pop = generate_population(&net, 20000, 4, Exec::Parallel).unwrap();
    pop.compute_posteriors(&net, Exec::Parallel).unwrap();
    let cache = StrategyCache::build(&pop, &cat, &PreferenceParams::default(), EvalOptions::default()).unwrap();
    let alloc = allocate(&pop, &cache, &OperationalLimits::reference(), AllocationMode::Static);
    let sim = simulate(&pop, &alloc, &cat, 5, 9, Exec::Parallel).unwrap();
    assert_eq!(v["allocation"], serde_json::to_value(&alloc).unwrap());
    assert_eq!(v["simulation"], serde_json::to_value(&sim).unwrap());
    for (id, cap) in OperationalLimits::reference().caps {
        assert!(alloc.count(&id) <= cap);
    }

    // Persisted, and readable by a server restarted on the same work dir.
    assert!(api.dir.path().join("jobs").join(format!("{id}.json")).is_file());
    let again = Arc::new(
        AppState::new(&ServerConfig {
            work_dir: api.dir.path().to_owned(),
            ..Default::default()
        })
        .unwrap(),
    );
    let restarted = Api {
        app: router(again),
        dir: tempfile::tempdir().unwrap(),
    };
    let (s, w) = restarted.get(&format!("/v1/allocations/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(w, v);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn long_job_reports_running() {
    let api = Api::new();
    let (_, v) = api
        .post(
            "/v1/allocations",
            json!({ "population": { "generate": { "size": 60000, "seed": 1 } }, "runs": 300 }),
        )
        .await;
    let id = v["id"].as_str().unwrap().to_owned();
    let (v, seen) = wait_for(&api, &id).await;
    assert_eq!(v["status"], json!("done"));
    assert!(seen.contains(&"running".to_owned()), "{seen:?}");
}

#[tokio::test]
async fn allocation_errors() {
    let api = Api::new();
    let (s, _) = api
        .post("/v1/allocations", json!({ "population": { "path": "missing.csv" } }))
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = api.get("/v1/allocations/a999").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn population_file_is_read_from_work_dir() {
    let api = Api::new();
    let net = crc_network();
    let pop = generate_population(&net, 2000, 5, Exec::Parallel).unwrap();
    let f = std::fs::File::create(api.dir.path().join("pop.csv")).unwrap();
    pop.write_csv(&net, f).unwrap();
    let (s, v) = api
        .post(
            "/v1/allocations",
            json!({ "population": { "path": "pop.csv" }, "runs": 0 }),
        )
        .await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let (v, _) = wait_for(&api, v["id"].as_str().unwrap()).await;
    assert_eq!(v["status"], json!("done"));
    assert_eq!(v["allocation"]["assignments"].as_array().unwrap().len(), 2000);
    assert!(v.get("simulation").is_none());
}

#[tokio::test]
async fn device_benchmark() {
    let api = Api::new();
    let dev1 = json!({
        "id": "Dev1", "sensitivity": 0.85, "specificity": 0.8, "unit_cost": 250.0, "comfort": 2,
        "complications": [{ "kind": "None", "probability": 1.0, "cost": 0.0 }]
    });
    let (s, v) = api.post("/v1/devices/benchmark", json!({ "device": dev1 })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["dominance"]["dominated"], json!(true));
    assert_eq!(v["dominance"]["by"], json!(["sDNA"]));

    let dev2 = json!({
        "id": "Dev2", "sensitivity": 0.85, "specificity": 0.94, "unit_cost": 3.0, "comfort": 3,
        "complications": [{ "kind": "None", "probability": 1.0, "cost": 0.0 }]
    });
    let (s, v) = api
        .post(
            "/v1/devices/benchmark",
            json!({ "device": dev2, "probePriors": [0.00085082] }),
        )
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["dominance"]["dominated"], json!(false));
    let eu = v["deviceEu"][0][1].as_f64().unwrap();
    assert!((eu - 0.179).abs() < 0.01, "{eu}");

    let (s, _) = api
        .post(
            "/v1/devices/benchmark",
            json!({ "device": { "id": "Bad", "sensitivity": 2.0 } }),
        )
        .await;
    assert!(s.is_client_error());
}

#[tokio::test]
async fn curves_match_library() {
    let api = Api::new();
    let (s, v) = api
        .get("/v1/curves/vinfo?methods=FIT,sDNA&points=101&lo=0.00085&hi=0.55")
        .await;
    assert_eq!(s, StatusCode::OK);
    let cat = default_catalog();
    let grid = linear_grid(0.00085, 0.55, 101);
    for m in ["FIT", "sDNA"] {
        let want = v_info_curve(cat.get(&InterventionId::from(m)).unwrap(), &grid).unwrap();
        assert_eq!(v["curves"][m], serde_json::to_value(&want).unwrap());
    }
    assert_eq!(v["curves"]["FIT"].as_array().unwrap().len(), 101);
    assert!((v["curves"]["FIT"][0][1].as_f64().unwrap() - 0.245).abs() < 0.01);

    let (s, _) = api.get("/v1/curves/vinfo?methods=&points=10").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.get("/v1/curves/vinfo").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.get("/v1/curves/vinfo?methods=Nope").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.get("/v1/curves/vinfo?methods=FIT&lo=0.6&hi=0.5").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

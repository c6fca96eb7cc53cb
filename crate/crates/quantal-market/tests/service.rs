use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use quantal_market::io::Fixtures;
use quantal_market::service::{router, wtp_slice, AppState, ApiError, ErrorCode, SchemaDocument, WtpSlice};
use quantal_market::simulation::SimulationOutput;
use quantal_market::tables::PaperTables;
use quantal_market_core::schema::Season;
use quantal_market_core::wtp::wtp_table;
use serde_json::{json, Value};
use tower::ServiceExt;

fn state() -> Arc<AppState> {
    let t = PaperTables::load(&Fixtures::bundled()).unwrap();
    let m = t.pooled_model().unwrap();
    Arc::new(AppState::new(t.schema, m, t.population).unwrap())
}

async fn call(state: &Arc<AppState>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: &Value) -> Request<Body> {
    Request::post("/simulate").header("content-type", "application/json").body(Body::from(body.to_string())).unwrap()
}

fn ground(price: f64) -> Value {
    json!({
        "cut": "ground", "season": "winter", "price": price, "weight": 16, "use_by": 7,
        "fat_colour": "white", "meat_colour": "red", "packaging": "tray", "brand": "brand_1",
        "certification": "usda", "feed": "grain", "traceable": "no", "antibiotic_free": "no",
        "hormone_added": "yes", "organic": "yes", "angus": "no", "non_gmo": "yes",
        "pasture": "no", "natural": "no"
    })
}

#[tokio::test]
async fn schema_lists_cuts_and_seasons_and_is_stable() {
    let s = state();
    let (status, a) = call(&s, get("/schema")).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b) = call(&s, get("/schema")).await;
    assert_eq!(a, b);
    let doc: SchemaDocument = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc.schema.cuts.len(), 9);
    assert_eq!(doc.seasons, vec![Season::Winter, Season::Summer]);
    assert_eq!(doc.schema, s.schema);
    assert_eq!(doc.cells.len(), 18);
    assert!(doc.profile_fields["state"].contains(&"new_york".to_string()));
    assert_eq!(serde_json::to_vec(&doc).unwrap(), a);
}

#[tokio::test]
async fn simulate_returns_a_forecast() {
    let s = state();
    let (status, body) = call(&s, post(&ground(12.0))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let out: SimulationOutput = serde_json::from_slice(&body).unwrap();
    assert_eq!(out.results.len(), 1);
    let f = &out.results[0].points[0];
    assert_eq!(f.probabilities.len(), 11);
    assert!((f.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(out.comparison.is_none());

    let mut both = ground(12.0);
    both["both_seasons"] = json!(true);
    both["sweep"] = json!("6:24:6");
    let (_, body) = call(&s, post(&both)).await;
    let out: SimulationOutput = serde_json::from_slice(&body).unwrap();
    assert_eq!(out.results.len(), 2);
    assert_eq!(out.results[1].points.len(), 4);
}

async fn error_of(s: &Arc<AppState>, req: Request<Body>) -> (StatusCode, ApiError) {
    let (status, body) = call(s, req).await;
    (status, serde_json::from_slice(&body).unwrap_or_else(|_| panic!("{}", String::from_utf8_lossy(&body))))
}

#[tokio::test]
async fn invalid_requests_get_typed_errors() {
    let s = state();
    let (status, e) = error_of(&s, post(&ground(-1.0))).await;
    assert_eq!((status, e.code), (StatusCode::BAD_REQUEST, ErrorCode::BadRequest), "{e:?}");

    let mut brisket = ground(12.0);
    brisket["cut"] = json!("brisket");
    let (status, e) = error_of(&s, post(&brisket)).await;
    assert_eq!((status, e.code), (StatusCode::NOT_FOUND, ErrorCode::UnknownCut));

    let mut missing = ground(12.0);
    missing.as_object_mut().unwrap().remove("brand");
    let (_, e) = error_of(&s, post(&missing)).await;
    assert_eq!(e.code, ErrorCode::BadRequest);

    let raw = Request::post("/simulate").body(Body::from("{not json")).unwrap();
    let (status, e) = error_of(&s, raw).await;
    assert_eq!((status, e.code), (StatusCode::BAD_REQUEST, ErrorCode::BadRequest));

    let (_, e) = error_of(&s, get("/wtp?cut=brisket&season=winter")).await;
    assert_eq!(e.code, ErrorCode::UnknownCut);
    let (_, e) = error_of(&s, get("/wtp?cut=ground&season=spring")).await;
    assert_eq!(e.code, ErrorCode::BadRequest);
    let (_, e) = error_of(&s, get("/wtp?cut=ground")).await;
    assert_eq!(e.code, ErrorCode::BadRequest);
}

#[tokio::test]
async fn wtp_slice_matches_the_full_table() {
    let s = state();
    let (status, body) = call(&s, get("/wtp?cut=ground&season=winter")).await;
    assert_eq!(status, StatusCode::OK);
    let slice: WtpSlice = serde_json::from_slice(&body).unwrap();
    let fat = slice.entries.iter().find(|e| e.attribute == "fat_colour" && e.level == "white").unwrap();
    assert!((fat.value.unwrap() - 3.14).abs() < 0.005);
    let marbling: Vec<_> = slice.entries.iter().filter(|e| e.attribute == "marbling").collect();
    assert!(marbling.iter().all(|e| e.value.is_none_or(|v| v == 0.0)), "{marbling:?}");

    let table = wtp_table(&s.schema, &s.model).unwrap();
    for cut in &s.schema.cuts {
        for season in Season::ALL {
            let slice = wtp_slice(&s, cut, &season.to_string()).unwrap();
            let cell = quantal_market_core::Cell::new(cut.clone(), season);
            for e in &slice.entries {
                assert_eq!(table.get(&cell, &e.attribute, &e.level).and_then(|x| x.value), e.value);
            }
        }
    }
}

#[tokio::test]
async fn cross_origin_requests_are_allowed() {
    let s = state();
    let req = Request::get("/schema").header("origin", "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = router(s).oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}

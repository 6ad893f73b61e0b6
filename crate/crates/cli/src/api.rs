//! HTTP/JSON API over one exploration session.
//!
//! Handlers run on the blocking pool and take the session lock for their
//! whole duration, so mutations are serialized and every response reflects
//! one consistent state.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use archmap::{Architecture, Family, OpKind, Space};
use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::session::{Session, SessionConfig, FILTER_ATTRIBUTES};

pub const HISTOGRAM_BINS: usize = 20;
const METRIC_NAMES: [&str; 4] = ["accuracy", "params", "flops", "train_time"];

pub struct AppState {
    pub session: Mutex<Option<Session>>,
    pub config: SessionConfig,
}

impl AppState {
    /// Opens the session eagerly; on failure the API starts without one
    /// and the error is returned alongside.
    pub fn new(config: SessionConfig) -> (Arc<Self>, Option<CliError>) {
        let (session, err) = match Session::open(config.clone()) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e)),
        };
        (Arc::new(AppState { session: Mutex::new(session), config }), err)
    }
}

impl IntoResponse for CliError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.to_json())).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", get(session_status).post(session_load))
        .route("/api/space", get(space))
        .route("/api/layout", get(layout))
        .route("/api/selection", get(selection))
        .route("/api/select", post(select))
        .route("/api/filter", post(filter))
        .route("/api/compare", get(compare))
        .route("/api/search/runs", get(search_runs))
        .route("/api/search/trace", get(search_trace))
        .fallback(|| async { CliError::NotFound("no such endpoint".into()) })
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

type Params = Query<HashMap<String, String>>;

async fn with_session<F>(state: Arc<AppState>, f: F) -> Response
where
    F: FnOnce(&mut Session) -> Result<Value> + Send + 'static,
{
    let run = tokio::task::spawn_blocking(move || {
        let mut guard = state.session.lock().unwrap_or_else(|e| e.into_inner());
        f(guard.as_mut().ok_or(CliError::NoSession)?)
    });
    respond(run.await)
}

fn respond(r: std::result::Result<Result<Value>, tokio::task::JoinError>) -> Response {
    match r {
        Ok(Ok(v)) => Json(v).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({ "error": "Internal", "message": e.to_string() })),
        )
            .into_response(),
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| CliError::BadRequest(format!("invalid request body: {e}")))
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, name: &str) -> Result<Option<T>> {
    q.get(name)
        .map(|s| s.parse().map_err(|_| CliError::BadRequest(format!("bad value {s:?} for {name}"))))
        .transpose()
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn session_summary(s: &Session) -> Value {
    json!({
        "space_hash": s.hash_hex(),
        "sampled": s.dm.len(),
        "depth": s.tree.depth(),
        "metrics": s.metrics.is_some(),
        "runs": s.traces.keys().collect::<Vec<_>>(),
    })
}

async fn session_status(State(state): State<Arc<AppState>>) -> Response {
    with_session(state, |s| Ok(session_summary(s))).await
}

async fn session_load(State(state): State<Arc<AppState>>) -> Response {
    let run = tokio::task::spawn_blocking(move || {
        let mut guard = state.session.lock().unwrap_or_else(|e| e.into_inner());
        let s = Session::open(state.config.clone())?;
        let summary = session_summary(&s);
        *guard = Some(s);
        Ok(summary)
    });
    respond(run.await)
}

fn histogram(values: &[f64]) -> Value {
    let known: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let missing = values.len() - known.len();
    if known.is_empty() {
        return json!({ "min": null, "max": null, "counts": vec![0; HISTOGRAM_BINS], "missing": missing });
    }
    let lo = known.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = known.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for v in known {
        let bin = if hi > lo { ((v - lo) / (hi - lo) * HISTOGRAM_BINS as f64) as usize } else { 0 };
        counts[bin.min(HISTOGRAM_BINS - 1)] += 1;
    }
    json!({ "min": lo, "max": hi, "counts": counts, "missing": missing })
}

async fn space(State(state): State<Arc<AppState>>) -> Response {
    with_session(state, |s| {
        let ops: Vec<Value> = (0..s.space.num_ops())
            .map(|i| {
                let op = s.space.op(i as u8);
                json!({ "id": i, "name": op.name, "kind": op.kind })
            })
            .collect();
        let histograms: BTreeMap<&str, Value> = METRIC_NAMES
            .iter()
            .map(|&name| {
                let values: Vec<f64> =
                    (0..s.dm.len()).map(|row| s.attribute(row, name).unwrap_or(f64::NAN)).collect();
                (name, histogram(&values))
            })
            .collect();
        Ok(json!({
            "version": s.space.spec().version,
            "space_hash": s.hash_hex(),
            "family": s.space.family(),
            "size": s.space.size().to_string(),
            "positions": s.space.positions(),
            "ops": ops,
            "costs": {
                "matrix": s.space.cost_matrix(),
                "insertion_deletion": s.space.insertion_deletion_cost(),
                "unit": s.space.cost_unit(),
            },
            "sampled": s.dm.len(),
            "backend": s.dm.backend().name(),
            "depth": s.tree.depth(),
            "levels": (0..=s.tree.depth()).map(|l| s.tree.clusters_at_level(l)).collect::<Vec<_>>(),
            "top1_threshold": s.top_threshold,
            "histograms": histograms,
        }))
    })
    .await
}

/// Share of each op among the positions of `archs`.
fn op_ratios(space: &Space, archs: &[Architecture]) -> Vec<f64> {
    let mut counts = vec![0usize; space.num_ops()];
    let mut total = 0;
    for a in archs {
        for &op in a.ops() {
            counts[op as usize] += 1;
            total += 1;
        }
    }
    counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
}

fn decode_rows(s: &Session, rows: &[usize]) -> Result<Vec<Architecture>> {
    Ok(rows.iter().map(|&r| s.space.decode(s.dm.ids()[r])).collect::<archmap::Result<_>>()?)
}

async fn layout(State(state): State<Arc<AppState>>, Query(q): Params) -> Response {
    with_session(state, move |s| {
        let level = param(&q, "level")?.unwrap_or(0);
        let cluster = param(&q, "cluster")?.unwrap_or(0);
        let view = s.view(level, cluster)?;
        let mut archs = Vec::new();
        let mut clusters = Vec::new();
        let mut glyphs = Vec::new();
        for c in &view.clusters {
            for cell in &c.cells {
                let row = s.dm.index_of(cell.arch_id).expect("layout ids are sampled");
                archs.push(json!({
                    "arch_id": cell.arch_id,
                    "cluster": c.id,
                    "accuracy": num(s.accuracy[row]),
                    "quantile": num(s.quantile[row]),
                    "top1": s.is_top(row),
                }));
            }
            let node = s.tree.node(c.id).expect("layout clusters exist in the tree");
            clusters.push(json!({
                "id": c.id,
                "size": node.members.len(),
                "sampled": c.cells.len(),
                "stats": node.stats,
                "op_ratios": op_ratios(&s.space, &decode_rows(s, &node.members)?),
            }));
            for g in &c.glyphs {
                let arch = s.space.decode(g.arch_id)?;
                glyphs.push(json!({
                    "arch_id": g.arch_id,
                    "cluster": c.id,
                    "ops": arch.ops().iter().map(|&o| &s.space.op(o).name).collect::<Vec<_>>(),
                    "op_ratios": op_ratios(&s.space, std::slice::from_ref(&arch)),
                }));
            }
        }
        Ok(json!({
            "level": level,
            "cluster": cluster,
            "scale": view.scale,
            "layout": &*view,
            "archs": archs,
            "clusters": clusters,
            "glyphs": glyphs,
            "top1_threshold": s.top_threshold,
        }))
    })
    .await
}

fn selection_body(s: &Session) -> Value {
    let visible: Vec<u64> = if s.filters.is_empty() {
        s.selection.iter().copied().collect()
    } else {
        s.selection.intersection(&s.survivors(&s.filters)).copied().collect()
    };
    json!({
        "selection": s.selection,
        "count": s.selection.len(),
        "filters": s.filters,
        "visible": visible,
    })
}

async fn selection(State(state): State<Arc<AppState>>) -> Response {
    with_session(state, |s| Ok(selection_body(s))).await
}

#[derive(Deserialize, Default, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
enum SelectMode {
    #[default]
    Replace,
    Add,
    Remove,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct SelectRequest {
    ids: Option<Vec<u64>>,
    lasso: Option<Vec<[f64; 2]>>,
    cluster: Option<usize>,
    /// Navigation level of the view the lasso or cluster refers to.
    level: Option<usize>,
    /// Root cluster of that view.
    view: Option<usize>,
    #[serde(default)]
    mode: SelectMode,
}

/// Even-odd rule; points exactly on an edge may fall either way.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = poly.len().wrapping_sub(1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn resolve_selection(s: &mut Session, req: &SelectRequest) -> Result<BTreeSet<u64>> {
    let given = usize::from(req.ids.is_some()) + usize::from(req.lasso.is_some()) + usize::from(req.cluster.is_some());
    if given != 1 {
        return Err(CliError::BadRequest("give exactly one of ids, lasso and cluster".into()));
    }
    if let Some(ids) = &req.ids {
        if let Some(id) = ids.iter().find(|&&id| s.dm.index_of(id).is_none()) {
            return Err(CliError::NotFound(format!("architecture {id} is not in the sample")));
        }
        return Ok(ids.iter().copied().collect());
    }
    let view_root = req.view.unwrap_or(0);
    if let Some(poly) = &req.lasso {
        if poly.len() < 3 {
            return Err(CliError::BadRequest("a lasso needs at least three points".into()));
        }
        let view = s.view(req.level.unwrap_or(0), view_root)?;
        return Ok(view
            .clusters
            .iter()
            .flat_map(|c| &c.cells)
            .filter(|cell| point_in_polygon([cell.x, cell.y], poly))
            .map(|cell| cell.arch_id)
            .collect());
    }
    let id = req.cluster.expect("checked above");
    let node_level = s.tree.node(id).ok_or_else(|| CliError::NotFound(format!("no cluster {id}")))?.level;
    let view = s.view(req.level.unwrap_or(node_level), view_root)?;
    let c = view
        .clusters
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| CliError::NotFound(format!("cluster {id} is not shown in that view")))?;
    Ok(c.cells.iter().map(|cell| cell.arch_id).collect())
}

async fn select(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    with_session(state, move |s| {
        let req: SelectRequest = parse_body(&body)?;
        let hit = resolve_selection(s, &req)?;
        match req.mode {
            SelectMode::Replace => s.selection = hit,
            SelectMode::Add => s.selection.extend(hit),
            SelectMode::Remove => s.selection.retain(|id| !hit.contains(id)),
        }
        s.snapshot()?;
        Ok(selection_body(s))
    })
    .await
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct FilterRequest {
    ranges: BTreeMap<String, [f64; 2]>,
}

async fn filter(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    with_session(state, move |s| {
        let req: FilterRequest = parse_body(&body)?;
        if let Some(bad) = req.ranges.keys().find(|k| !FILTER_ATTRIBUTES.contains(&k.as_str())) {
            return Err(CliError::BadRequest(format!(
                "unknown attribute {bad:?}; expected one of {FILTER_ATTRIBUTES:?}"
            )));
        }
        if let Some((k, _)) = req.ranges.iter().find(|(_, [lo, hi])| lo.is_nan() || hi.is_nan() || lo > hi) {
            return Err(CliError::BadRequest(format!("empty range for {k}")));
        }
        s.filters = req.ranges;
        s.snapshot()?;
        let ids = s.survivors(&s.filters);
        let visible: Vec<u64> = s.selection.intersection(&ids).copied().collect();
        Ok(json!({ "count": ids.len(), "ids": ids, "selection_visible": visible }))
    })
    .await
}

fn structure(space: &Space, arch: &Architecture) -> Value {
    let name = |o: u8| space.op(o).name.clone();
    let (nodes, edges): (Vec<String>, Vec<Value>) = match space.family() {
        Family::OpSlot => {
            let sk = space.skeleton().expect("op_slot space has a skeleton");
            let nodes = (0..sk.nodes)
                .map(|i| match i {
                    0 => "input".to_string(),
                    i if i + 1 == sk.nodes => "output".to_string(),
                    i => format!("node{i}"),
                })
                .collect();
            let edges = sk
                .edges
                .iter()
                .zip(arch.ops())
                .filter(|(_, &o)| space.op_kind(o) != OpKind::None)
                .map(|(&[u, v], &o)| json!({ "from": u, "to": v, "op": name(o) }))
                .collect();
            (nodes, edges)
        }
        Family::Topology => {
            let mut nodes = vec!["input".to_string()];
            nodes.extend(arch.ops().iter().map(|&o| name(o)));
            nodes.push("output".to_string());
            let edges = space
                .edge_pairs()
                .iter()
                .enumerate()
                .filter(|&(bit, _)| arch.edges() & (1 << bit) != 0)
                .map(|(_, &(i, j))| json!({ "from": i, "to": j }))
                .collect();
            (nodes, edges)
        }
    };
    let paths: Vec<Vec<String>> =
        space.paths(arch).into_iter().map(|p| p.into_iter().map(name).collect()).collect();
    json!({ "nodes": nodes, "edges": edges, "paths": paths })
}

async fn compare(State(state): State<Arc<AppState>>, Query(q): Params) -> Response {
    with_session(state, move |s| {
        let raw = q.get("ids").map(String::as_str).unwrap_or("");
        let ids: Vec<u64> = raw
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse().map_err(|_| CliError::BadRequest(format!("bad id {t:?}"))))
            .collect::<Result<_>>()?;
        if ids.is_empty() {
            return Err(CliError::BadRequest("ids must list at least one architecture".into()));
        }
        let mut rows = Vec::new();
        let mut vectors = Vec::new();
        let mut structures = Vec::new();
        for &id in &ids {
            let arch = s.space.decode(id)?;
            let row = s.dm.index_of(id);
            let metric = s.metrics.as_ref().and_then(|m| m.get(id));
            let values: Vec<Value> = METRIC_NAMES
                .iter()
                .map(|&n| {
                    let v = match (row, metric) {
                        (Some(r), _) => s.attribute(r, n),
                        (None, Some(m)) => Some(match n {
                            "accuracy" => m.accuracy,
                            "params" => m.params,
                            "flops" => m.flops,
                            _ => m.train_time,
                        }),
                        (None, None) => None,
                    };
                    v.map_or(Value::Null, num)
                })
                .collect();
            let mut r = json!({
                "arch_id": id,
                "sampled": row.is_some(),
                "ops": arch.ops().iter().map(|&o| &s.space.op(o).name).collect::<Vec<_>>(),
                "quantile": row.map_or(Value::Null, |r| num(s.quantile[r])),
                "top1": row.is_some_and(|r| s.is_top(r)),
            });
            for (n, v) in METRIC_NAMES.iter().zip(&values) {
                r[*n] = v.clone();
            }
            rows.push(r);
            vectors.push(values);
            structures.push(structure(&s.space, &arch));
        }
        Ok(json!({
            "rows": rows,
            "attribute_names": METRIC_NAMES,
            "vectors": vectors,
            "structures": structures,
        }))
    })
    .await
}

async fn search_runs(State(state): State<Arc<AppState>>) -> Response {
    with_session(state, |s| {
        let runs: Vec<Value> = s
            .traces
            .iter()
            .map(|(name, t)| {
                json!({
                    "run": name,
                    "strategy": t.strategy,
                    "seed": t.seed,
                    "filters": t.filters,
                    "evaluations": t.evaluated.len(),
                    "best": t.best,
                })
            })
            .collect();
        Ok(json!({ "runs": runs }))
    })
    .await
}

async fn search_trace(State(state): State<Arc<AppState>>, Query(q): Params) -> Response {
    with_session(state, move |s| {
        let run = q.get("run").ok_or_else(|| CliError::BadRequest("run is required".into()))?;
        let trace = s.traces.get(run).ok_or_else(|| CliError::NotFound(format!("no run {run:?}")))?;
        // iterations whose architecture is on the map, for highlighting
        let on_map: Vec<Value> = trace
            .evaluated
            .iter()
            .enumerate()
            .filter(|(_, e)| s.dm.index_of(e.arch_id).is_some())
            .map(|(i, e)| json!({ "iteration": i + 1, "arch_id": e.arch_id }))
            .collect();
        Ok(json!({ "run": run, "trace": trace, "sampled_hits": on_map }))
    })
    .await
}

//! Stateless HTTP front end for the reward functions.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use super::{total_reward, RewardBreakdown, RewardMode};
use crate::types::{LabelSchema, MatchConfig};

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardServiceConfig {
    pub bind: SocketAddr,
    pub matching: MatchConfig,
}

impl Default for RewardServiceConfig {
    fn default() -> Self {
        Self {
            bind: default_bind(),
            matching: MatchConfig::default(),
        }
    }
}

/// Shared by all handlers. When `schema` is set, gold labels outside it are
/// rejected with 400.
#[derive(Clone, Debug, Default)]
pub struct ServiceState {
    pub matching: MatchConfig,
    pub schema: Option<Arc<LabelSchema>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub response: String,
    pub gold: String,
    pub mode: RewardMode,
}

/// Parallel arrays: `responses[i]` is scored against `golds[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub responses: Vec<String>,
    pub golds: Vec<String>,
    pub mode: RewardMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub rewards: Vec<RewardBreakdown>,
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": message }))).into_response()
}

impl ServiceState {
    fn check_gold(&self, gold: &str) -> Result<(), String> {
        match &self.schema {
            Some(s) if s.canonical(gold, self.matching).is_none() => {
                Err(format!("gold label `{gold}` is not in the schema"))
            }
            _ => Ok(()),
        }
    }
}

async fn reward(State(st): State<Arc<ServiceState>>, Json(req): Json<RewardRequest>) -> Response {
    if let Err(msg) = st.check_gold(&req.gold) {
        return bad_request(msg);
    }
    Json(total_reward(&req.response, &req.gold, req.mode, st.matching)).into_response()
}

async fn reward_batch(State(st): State<Arc<ServiceState>>, Json(req): Json<BatchRequest>) -> Response {
    if req.responses.len() != req.golds.len() {
        return bad_request(format!(
            "{} responses but {} gold labels",
            req.responses.len(),
            req.golds.len()
        ));
    }
    for g in &req.golds {
        if let Err(msg) = st.check_gold(g) {
            return bad_request(msg);
        }
    }
    let rewards = req
        .responses
        .iter()
        .zip(&req.golds)
        .map(|(r, g)| total_reward(r, g, req.mode, st.matching))
        .collect();
    Json(BatchResponse { rewards }).into_response()
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/v1/reward", post(reward))
        .route("/v1/reward/batch", post(reward_batch))
        .route("/healthz", get(healthz))
        .with_state(Arc::new(state))
}

/// Serves until the task is dropped or the listener fails.
pub async fn serve(listener: TcpListener, state: ServiceState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use gencls::backend::{word_tokens, Backend, BackendError, DecodeParams, FinishReason, HttpBackend, HttpBackendConfig};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpListener;

async fn spawn(router: Router) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    format!("http://{addr}/v1")
}

fn backend(base: &str) -> HttpBackend {
    let mut cfg = HttpBackendConfig::new(base, "tiny");
    cfg.backoff_ms = 1;
    cfg.timeout_secs = 5;
    HttpBackend::new("http", cfg).unwrap()
}

async fn chat(Json(body): Json<Value>) -> Json<Value> {
    let prompt = body["messages"][0]["content"].as_str().unwrap().to_string();
    assert_eq!(body["temperature"], json!(0.0));
    Json(json!({
        "choices": [{
            "message": {"role": "assistant", "content": "Category: joy"},
            "finish_reason": if prompt.contains("long") { "length" } else { "stop" },
            "logprobs": {"content": [
                {"token": "Category:", "logprob": -0.01},
                {"token": " joy", "logprob": -0.3}
            ]}
        }]
    }))
}

/// Echo scoring over whitespace-led tokens, each with logprob -0.5 except
/// the very first, which gets null like real servers do.
async fn echo(Json(body): Json<Value>) -> Json<Value> {
    assert_eq!(body["echo"], json!(true));
    let text = body["prompt"].as_str().unwrap();
    let mut offsets = Vec::new();
    let mut lps = Vec::new();
    let mut at = 0;
    for tok in word_tokens(text) {
        offsets.push(at);
        lps.push(if at == 0 { Value::Null } else { json!(-0.5) });
        at += tok.chars().count();
    }
    Json(json!({
        "choices": [{
            "text": text,
            "logprobs": {"token_logprobs": lps, "text_offset": offsets}
        }]
    }))
}

#[tokio::test]
async fn chat_completion_maps_text_logprobs_and_finish_reason() {
    let base = spawn(Router::new().route("/v1/chat/completions", post(chat))).await;
    let b = backend(&base);
    let r = b.generate("Text: hi", &DecodeParams::default()).await.unwrap();
    assert_eq!(r.text, "Category: joy");
    assert_eq!(r.finish_reason, FinishReason::Stop);
    let lps = r.token_logprobs.unwrap();
    assert_eq!(lps.len(), 2);
    assert_eq!(lps[1].token, " joy");
    assert_eq!(lps[1].logprob, -0.3);
    let r = b.generate("a long one", &DecodeParams::default()).await.unwrap();
    assert_eq!(r.finish_reason, FinishReason::Length);
}

#[tokio::test]
async fn echo_scoring_returns_only_continuation_tokens() {
    let base = spawn(Router::new().route("/v1/completions", post(echo))).await;
    let b = backend(&base);
    let toks = b.score_continuation("Text: hi\n", "Category: joy").await.unwrap();
    let joined: String = toks.iter().map(|t| t.token.as_str()).collect();
    assert_eq!(joined, "Category: joy");
    assert!(toks.iter().all(|t| t.logprob == -0.5));
    assert!(b.probe_scoring().await.unwrap());
}

#[tokio::test]
async fn missing_logprobs_mean_scoring_unsupported() {
    async fn no_lp(Json(_): Json<Value>) -> Json<Value> {
        Json(json!({"choices": [{"text": "x", "logprobs": null}]}))
    }
    let base = spawn(Router::new().route("/v1/completions", post(no_lp))).await;
    let b = backend(&base);
    assert_eq!(
        b.score_continuation("p", "Category: joy").await.unwrap_err(),
        BackendError::ScoringUnsupported
    );
    assert!(!b.probe_scoring().await.unwrap());
}

#[tokio::test]
async fn api_errors_are_not_retried() {
    async fn reject(State(hits): State<Arc<AtomicUsize>>, Json(_): Json<Value>) -> (StatusCode, Json<Value>) {
        hits.fetch_add(1, Ordering::SeqCst);
        (StatusCode::BAD_REQUEST, Json(json!({"error": {"message": "bad model"}})))
    }
    let hits = Arc::new(AtomicUsize::new(0));
    let base = spawn(
        Router::new()
            .route("/v1/chat/completions", post(reject))
            .with_state(hits.clone()),
    )
    .await;
    let err = backend(&base).generate("p", &DecodeParams::default()).await.unwrap_err();
    assert_eq!(
        err,
        BackendError::Api {
            status: 400,
            message: "bad model".into()
        }
    );
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn dropped_connections_are_retried() {
    // Raw server: the first two connections are closed without a reply.
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let accepted = Arc::new(AtomicUsize::new(0));
    let counter = accepted.clone();
    tokio::spawn(async move {
        loop {
            let (mut sock, _) = listener.accept().await.unwrap();
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let mut buf = vec![0u8; 8192];
            let _ = sock.read(&mut buf).await;
            if n < 2 {
                drop(sock);
                continue;
            }
            let body = json!({"choices": [{"message": {"content": "Category: fear"}, "finish_reason": "stop"}]}).to_string();
            let resp = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            sock.write_all(resp.as_bytes()).await.unwrap();
        }
    });
    let b = backend(&format!("http://{addr}/v1"));
    let r = b.generate("p", &DecodeParams::default()).await.unwrap();
    assert_eq!(r.text, "Category: fear");
    assert_eq!(r.token_logprobs, None);
    assert_eq!(accepted.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    let mut cfg = HttpBackendConfig::new("http://127.0.0.1:1/v1", "tiny");
    cfg.max_retries = 1;
    cfg.backoff_ms = 1;
    let b = HttpBackend::new("dead", cfg).unwrap();
    let err = b.generate("p", &DecodeParams::default()).await.unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err:?}");
    assert!(b.probe_scoring().await.is_err());
}

#[tokio::test]
async fn positive_logprobs_are_rejected() {
    async fn bogus(Json(_): Json<Value>) -> Json<Value> {
        Json(json!({"choices": [{"message": {"content": "x"},
            "logprobs": {"content": [{"token": "x", "logprob": 0.5}]}}]}))
    }
    let base = spawn(Router::new().route("/v1/chat/completions", post(bogus))).await;
    let err = backend(&base).generate("p", &DecodeParams::default()).await.unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)));
}

//! Loopback verification service.
//!
//! `POST /enroll` and `POST /verify` take and return JSON. Every body
//! carries `"v": 1`. Passwords travel as 26-character base32.
//!
//! | outcome                        | status |
//! |--------------------------------|--------|
//! | accepted / enrolled            | 200    |
//! | wrong password                 | 401    |
//! | unknown credential             | 404    |
//! | replayed or stale password     | 409    |
//! | credential already enrolled    | 409    |
//! | chain expired                  | 410    |
//! | malformed request              | 400    |
//! | rate limited                   | 429    |
//! | store failure                  | 503    |

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tkey_core::encoding::{base32_to_password, uri_to_enrollment};
use tkey_core::prover::Enrollment;
use tkey_core::verifier::{CredentialStore, EnrollError, Rejection, Verifier, VerifyError};

use crate::clock::Clock;

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrollRequest {
    pub v: u32,
    pub cred_id: String,
    /// A `tkey://enroll?...` URI, or else `enrollment`.
    #[serde(default)]
    pub uri: Option<String>,
    #[serde(default)]
    pub enrollment: Option<Enrollment>,
    #[serde(default)]
    pub replace: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub v: u32,
    pub cred_id: String,
    pub otp: String,
    /// Client's UNIX time in seconds. Only reported back as skew; the
    /// server's clock decides the slot.
    #[serde(default)]
    pub client_time: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub v: u32,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_accepted: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_init: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    /// Client slot minus server slot, when the client sent its time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew_slots: Option<i64>,
}

impl WireResponse {
    fn new(status: &str) -> Self {
        WireResponse {
            v: WIRE_VERSION,
            status: status.into(),
            reason: None,
            t_accepted: None,
            t_init: None,
            t_max: None,
            skew_slots: None,
        }
    }

    fn rejected(reason: impl Into<String>) -> Self {
        WireResponse { reason: Some(reason.into()), ..Self::new("rejected") }
    }
}

fn reply(code: StatusCode, body: WireResponse) -> Response {
    (code, Json(body)).into_response()
}

/// Per-credential token bucket on verification attempts.
#[derive(Debug)]
pub struct RateLimit {
    burst: f64,
    per_second: f64,
    buckets: Mutex<HashMap<String, (f64, u64)>>,
}

impl RateLimit {
    pub fn per_minute(attempts: u32) -> Self {
        RateLimit { burst: attempts as f64, per_second: attempts as f64 / 60.0, buckets: Mutex::new(HashMap::new()) }
    }

    fn allow(&self, cred_id: &str, now: u64) -> bool {
        let mut buckets = self.buckets.lock().expect("rate limit lock poisoned");
        let (tokens, last) = buckets.entry(cred_id.to_string()).or_insert((self.burst, now));
        *tokens = (*tokens + now.saturating_sub(*last) as f64 * self.per_second).min(self.burst);
        *last = now;
        if *tokens >= 1.0 {
            *tokens -= 1.0;
            true
        } else {
            false
        }
    }
}

pub struct Service<S> {
    verifier: Verifier<S>,
    clock: Arc<dyn Clock>,
    rate_limit: Option<RateLimit>,
}

impl<S: CredentialStore + 'static> Service<S> {
    pub fn new(verifier: Verifier<S>, clock: Arc<dyn Clock>) -> Self {
        Service { verifier, clock, rate_limit: None }
    }

    pub fn with_rate_limit(mut self, limit: RateLimit) -> Self {
        self.rate_limit = Some(limit);
        self
    }

    pub fn verifier(&self) -> &Verifier<S> {
        &self.verifier
    }

    pub fn enroll(&self, body: &[u8]) -> (StatusCode, WireResponse) {
        let req: EnrollRequest = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return (StatusCode::BAD_REQUEST, WireResponse::rejected(format!("malformed request: {e}"))),
        };
        if req.v != WIRE_VERSION {
            return (StatusCode::BAD_REQUEST, WireResponse::rejected(format!("unsupported version {}", req.v)));
        }
        let payload = match (req.uri, req.enrollment) {
            (Some(uri), None) => match uri_to_enrollment(&uri) {
                Ok(e) => e,
                Err(e) => return (StatusCode::BAD_REQUEST, WireResponse::rejected(e.to_string())),
            },
            (None, Some(e)) => e,
            _ => return (StatusCode::BAD_REQUEST, WireResponse::rejected("give exactly one of uri and enrollment")),
        };
        match self.verifier.enroll(&req.cred_id, &payload, req.replace) {
            Ok(cred) => {
                let mut r = WireResponse::new("enrolled");
                r.t_init = Some(cred.t_init.0);
                r.t_max = Some(cred.t_max.0);
                (StatusCode::OK, r)
            }
            Err(e @ EnrollError::DuplicateCredential(_)) => (StatusCode::CONFLICT, WireResponse::rejected(e.to_string())),
            Err(e @ EnrollError::Store(_)) => (StatusCode::SERVICE_UNAVAILABLE, WireResponse::rejected(e.to_string())),
            Err(e) => (StatusCode::BAD_REQUEST, WireResponse::rejected(e.to_string())),
        }
    }

    pub fn verify(&self, body: &[u8]) -> (StatusCode, WireResponse) {
        let req: VerifyRequest = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return (StatusCode::BAD_REQUEST, WireResponse::rejected(format!("malformed request: {e}"))),
        };
        if req.v != WIRE_VERSION {
            return (StatusCode::BAD_REQUEST, WireResponse::rejected(format!("unsupported version {}", req.v)));
        }
        let now = self.clock.unix_seconds();
        if let Some(limit) = &self.rate_limit {
            if !limit.allow(&req.cred_id, now) {
                return (StatusCode::TOO_MANY_REQUESTS, WireResponse::rejected("rate limited"));
            }
        }
        let cred = match self.verifier.store().get(&req.cred_id) {
            Ok(Some(c)) => c,
            Ok(None) => return (StatusCode::NOT_FOUND, WireResponse::rejected("unknown credential")),
            Err(e) => return (StatusCode::SERVICE_UNAVAILABLE, WireResponse::rejected(e.to_string())),
        };
        let p = match base32_to_password(&req.otp, cred.params.n) {
            Ok(p) => p,
            Err(e) => return (StatusCode::BAD_REQUEST, WireResponse::rejected(format!("malformed password: {e}"))),
        };
        let t_server = cred.params.slot_of(now);
        let skew = req.client_time.map(|t| cred.params.slot_of(t).0 as i64 - t_server.0 as i64);
        let (code, mut resp) = match self.verifier.verify(&req.cred_id, &p, t_server) {
            Ok(acc) => {
                let mut r = WireResponse::new("accepted");
                r.t_accepted = Some(acc.slot.0);
                (StatusCode::OK, r)
            }
            Err(VerifyError::Rejected(r)) => {
                let code = match r {
                    Rejection::BadPassword { .. } => StatusCode::UNAUTHORIZED,
                    Rejection::ReplayOrStale => StatusCode::CONFLICT,
                    Rejection::Expired => StatusCode::GONE,
                    Rejection::MalformedPassword => StatusCode::BAD_REQUEST,
                };
                (code, WireResponse::rejected(r.to_string()))
            }
            Err(e @ VerifyError::UnknownCredential(_)) => (StatusCode::NOT_FOUND, WireResponse::rejected(e.to_string())),
            Err(e @ VerifyError::Store(_)) => (StatusCode::SERVICE_UNAVAILABLE, WireResponse::rejected(e.to_string())),
        };
        resp.skew_slots = skew;
        (code, resp)
    }
}

async fn enroll_handler<S: CredentialStore + 'static>(State(svc): State<Arc<Service<S>>>, body: Bytes) -> Response {
    match tokio::task::spawn_blocking(move || svc.enroll(&body)).await {
        Ok((code, r)) => reply(code, r),
        Err(e) => reply(StatusCode::INTERNAL_SERVER_ERROR, WireResponse::rejected(e.to_string())),
    }
}

async fn verify_handler<S: CredentialStore + 'static>(State(svc): State<Arc<Service<S>>>, body: Bytes) -> Response {
    // Verification hashes and fsyncs; keep it off the async workers.
    match tokio::task::spawn_blocking(move || svc.verify(&body)).await {
        Ok((code, r)) => reply(code, r),
        Err(e) => reply(StatusCode::INTERNAL_SERVER_ERROR, WireResponse::rejected(e.to_string())),
    }
}

pub fn router<S: CredentialStore + 'static>(svc: Arc<Service<S>>) -> Router {
    Router::new()
        .route("/enroll", post(enroll_handler::<S>))
        .route("/verify", post(verify_handler::<S>))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(svc)
}

/// Serves until interrupted.
pub async fn serve<S: CredentialStore + 'static>(svc: Arc<Service<S>>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

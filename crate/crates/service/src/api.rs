//! Routes and handlers for `/api/v1`.

use std::collections::HashMap;

use agriprice_core::engine::{load_artifact, preprocess, Mode};
use agriprice_core::ingest::{to_csv_string, RawRecord};
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{Duration, NaiveDate, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::auth::{
    decoy_hash, hash_password, new_token, normalize_email, password_is_acceptable, token_digest, verify_password,
    MIN_PASSWORD_LEN,
};
use crate::error::ApiError;
use crate::store::User;
use crate::{AppState, FORECAST_STEPS};

/// History rows returned with a forecast when the request names no range.
pub const DEFAULT_HISTORY_WEEKS: usize = 104;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/auth/register", post(register))
        .route("/auth/login", post(login))
        .route("/auth/logout", post(logout))
        .route("/commodities", get(commodities))
        .route("/series/{commodity}", get(series))
        .route("/forecast", post(forecast))
        .route("/jobs/{id}", get(job))
        .route("/download/{file}", get(download))
        .route("/enquiries", post(submit_enquiry))
        .route("/enquiries/{id}", get(enquiry))
        .route("/profile", get(profile).patch(update_profile));
    Router::new()
        .nest("/api/v1", api)
        .fallback(|| async { ApiError::not_found("not_found", "no such route") })
        .with_state(state)
}

/// The caller behind a valid `Authorization: Bearer` token.
pub struct AuthUser {
    pub id: i64,
    token_hash: String,
}

impl FromRequestParts<AppState> for AuthUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(ApiError::unauthorized)?;
        let token_hash = token_digest(token);
        let id = state
            .store
            .token_user(&token_hash, Utc::now().timestamp())?
            .ok_or_else(ApiError::unauthorized)?;
        Ok(Self { id, token_hash })
    }
}

/// JSON body extractor whose rejections use the `{code, message}` shape.
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(JsonRejection::JsonDataError(e)) => Err(ApiError::unprocessable("invalid_body", e.body_text())),
            Err(e) => Err(ApiError::bad_request(e.body_text())),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        log::error!("blocking task failed: {e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal server error")
    })?
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Serialize)]
pub struct Profile {
    pub id: i64,
    pub email: String,
    pub display_name: String,
    pub created_at: String,
}

impl From<User> for Profile {
    fn from(u: User) -> Self {
        Self {
            id: u.id,
            email: u.email,
            display_name: u.display_name,
            created_at: u.created_at,
        }
    }
}

fn invalid_email() -> ApiError {
    ApiError::unprocessable("invalid_email", "email address is not valid")
}

fn weak_password() -> ApiError {
    ApiError::unprocessable(
        "weak_password",
        format!("password must be at least {MIN_PASSWORD_LEN} characters"),
    )
}

#[derive(Deserialize)]
struct RegisterRequest {
    email: String,
    password: String,
    #[serde(default, alias = "name")]
    display_name: Option<String>,
}

async fn register(State(st): State<AppState>, ApiJson(req): ApiJson<RegisterRequest>) -> Result<Response, ApiError> {
    let email = normalize_email(&req.email).ok_or_else(invalid_email)?;
    if !password_is_acceptable(&req.password) {
        return Err(weak_password());
    }
    let name = req
        .display_name
        .map(|n| n.trim().to_string())
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| email.split('@').next().unwrap_or_default().to_string());
    let profile = blocking(move || {
        let hash = hash_password(&req.password)?;
        let id = st.store.create_user(&email, &hash, &name)?;
        Ok(Profile::from(st.store.user_by_id(id)?.expect("user just inserted")))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(profile)).into_response())
}

#[derive(Deserialize)]
struct LoginRequest {
    email: String,
    password: String,
}

#[derive(Serialize)]
struct LoginResponse {
    token: String,
    token_type: &'static str,
    expires_at: String,
}

async fn login(State(st): State<AppState>, ApiJson(req): ApiJson<LoginRequest>) -> Result<Json<LoginResponse>, ApiError> {
    blocking(move || {
        let user = match normalize_email(&req.email) {
            Some(email) => st.store.user_by_email(&email)?,
            None => None,
        };
        // unknown accounts still pay for one hash verification
        let stored = user.as_ref().map(|u| u.password_hash.as_str()).unwrap_or(decoy_hash());
        let verified = verify_password(&req.password, stored);
        let user = match user {
            Some(u) if verified => u,
            _ => return Err(ApiError::invalid_credentials()),
        };
        let token = new_token();
        let expires = Utc::now() + Duration::seconds(st.config.token_ttl_secs);
        st.store.insert_token(&token_digest(&token), user.id, expires.timestamp())?;
        Ok(Json(LoginResponse {
            token,
            token_type: "Bearer",
            expires_at: expires.to_rfc3339(),
        }))
    })
    .await
}

async fn logout(State(st): State<AppState>, user: AuthUser) -> Result<StatusCode, ApiError> {
    st.store.revoke_token(&user.token_hash)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn commodities(State(st): State<AppState>, _user: AuthUser) -> Result<Json<serde_json::Value>, ApiError> {
    Ok(Json(json!({ "commodities": st.store.commodities()? })))
}

#[derive(Debug, Serialize)]
struct SeriesPoint {
    date: NaiveDate,
    price_myr: Option<f64>,
    temperature_c: Option<f64>,
    humidity_pct: Option<f64>,
    precipitation_mm: Option<f64>,
    crude_oil_usd: Option<f64>,
}

impl From<RawRecord> for SeriesPoint {
    fn from(r: RawRecord) -> Self {
        Self {
            date: r.date,
            price_myr: r.price_myr,
            temperature_c: r.temperature_c,
            humidity_pct: r.humidity_pct,
            precipitation_mm: r.precipitation_mm,
            crude_oil_usd: r.crude_oil_usd,
        }
    }
}

fn date_param(query: &HashMap<String, String>, key: &str) -> Result<Option<NaiveDate>, ApiError> {
    query
        .get(key)
        .map(|v| {
            NaiveDate::parse_from_str(v, "%Y-%m-%d")
                .map_err(|_| ApiError::unprocessable("invalid_date", format!("'{key}' must be YYYY-MM-DD")))
        })
        .transpose()
}

async fn series(
    State(st): State<AppState>,
    _user: AuthUser,
    Path(commodity): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let from = date_param(&query, "from")?;
    let to = date_param(&query, "to")?;
    let points: Vec<SeriesPoint> = st
        .store
        .series_rows(&commodity, from, to)?
        .into_iter()
        .map(SeriesPoint::from)
        .collect();
    Ok(Json(json!({ "commodity": commodity, "points": points })))
}

#[derive(Debug, Deserialize)]
pub struct ForecastRequest {
    pub commodity: String,
    pub mode: String,
    pub horizon_weeks: i64,
    #[serde(default)]
    pub history_weeks: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub price_myr: f64,
    pub is_forecast: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForecastResult {
    pub commodity: String,
    pub mode: String,
    pub family: String,
    pub horizon_weeks: usize,
    pub generated_at: String,
    pub served_from_cache: bool,
    pub history: Vec<PricePoint>,
    pub forecast: Vec<PricePoint>,
}

async fn forecast(
    State(st): State<AppState>,
    _user: AuthUser,
    ApiJson(req): ApiJson<ForecastRequest>,
) -> Result<Response, ApiError> {
    let horizon = usize::try_from(req.horizon_weeks)
        .ok()
        .filter(|h| (1..=FORECAST_STEPS).contains(h))
        .ok_or_else(|| {
            ApiError::unprocessable(
                "horizon_out_of_range",
                format!("horizon_weeks must be between 1 and {FORECAST_STEPS}"),
            )
        })?;
    let mode: Mode = req
        .mode
        .parse()
        .map_err(|_| ApiError::unprocessable("invalid_mode", "mode must be 'univariate' or 'multivariate'"))?;
    let history = req.history_weeks.unwrap_or(DEFAULT_HISTORY_WEEKS);
    blocking(move || forecast_blocking(&st, &req.commodity, mode, horizon, history)).await
}

fn forecast_blocking(
    st: &AppState,
    commodity: &str,
    mode: Mode,
    horizon: usize,
    history_weeks: usize,
) -> Result<Response, ApiError> {
    let unknown = || ApiError::not_found("unknown_commodity", format!("unknown commodity '{commodity}'"));
    let current = st.store.fingerprint(commodity)?.ok_or_else(unknown)?;
    let mode_name = mode.as_str();

    let cached = st.store.cached_forecast(commodity, mode_name)?.filter(|c| c.fingerprint == current);
    let (family, values, generated_at, from_cache) = match cached {
        Some(c) => (c.family, c.values, c.generated_at, true),
        None => {
            let fresh = st
                .store
                .artifact(commodity, mode_name)?
                .filter(|a| a.fingerprint == current)
                .and_then(|a| match load_artifact(&a.path).and_then(|m| m.forecast(FORECAST_STEPS)) {
                    Ok(values) => Some((a.family, values)),
                    Err(e) => {
                        log::warn!("artifact {} unusable, retraining: {e}", a.path);
                        None
                    }
                });
            match fresh {
                Some((family, values)) => {
                    st.store.put_forecast(commodity, mode_name, &family, &current, &values)?;
                    (family, values, Utc::now().to_rfc3339(), false)
                }
                None => {
                    let job = st.jobs.submit(commodity, mode)?;
                    let body = json!({
                        "code": "model_not_ready",
                        "message": "no trained model for this commodity and mode yet; poll the job",
                        "job_id": job.id,
                        "status": job.status,
                    });
                    return Ok((StatusCode::ACCEPTED, Json(body)).into_response());
                }
            }
        }
    };

    let frame = preprocess(&st.store.load_frame(commodity)?, st.config.engine.policy)?;
    let prices = frame.prices()?;
    let dates = frame.timestamps();
    let start = dates.len().saturating_sub(history_weeks);
    let history = dates[start..]
        .iter()
        .zip(&prices[start..])
        .map(|(&date, &price_myr)| PricePoint {
            date,
            price_myr,
            is_forecast: false,
        })
        .collect();
    let last = *dates.last().expect("stored series is non-empty");
    let forecast = values
        .iter()
        .take(horizon)
        .enumerate()
        .map(|(k, &price_myr)| PricePoint {
            date: last + Duration::weeks(k as i64 + 1),
            price_myr,
            is_forecast: true,
        })
        .collect();
    Ok(Json(ForecastResult {
        commodity: commodity.to_string(),
        mode: mode_name.to_string(),
        family,
        horizon_weeks: horizon,
        generated_at,
        served_from_cache: from_cache,
        history,
        forecast,
    })
    .into_response())
}

async fn job(State(st): State<AppState>, _user: AuthUser, Path(id): Path<String>) -> Result<Response, ApiError> {
    match st.store.job(&id)? {
        Some(job) => Ok(Json(job).into_response()),
        None => Err(ApiError::not_found("unknown_job", format!("no job '{id}'"))),
    }
}

async fn download(State(st): State<AppState>, _user: AuthUser, Path(file): Path<String>) -> Result<Response, ApiError> {
    let commodity = file
        .strip_suffix(".csv")
        .ok_or_else(|| ApiError::not_found("not_found", "downloads are named '<commodity>.csv'"))?
        .to_string();
    let body = blocking(move || {
        let frame = st.store.load_frame(&commodity)?;
        Ok(to_csv_string(&frame, &commodity).map_err(crate::ServiceError::from)?)
    })
    .await?;
    let disposition = format!("attachment; filename=\"{file}\"");
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        body,
    )
        .into_response())
}

#[derive(Deserialize)]
struct EnquiryRequest {
    #[serde(default)]
    subject: String,
    body: String,
}

async fn submit_enquiry(
    State(st): State<AppState>,
    user: AuthUser,
    ApiJson(req): ApiJson<EnquiryRequest>,
) -> Result<Response, ApiError> {
    if req.body.trim().is_empty() {
        return Err(ApiError::unprocessable("empty_body", "enquiry body must not be empty"));
    }
    let id = st.store.insert_enquiry(user.id, req.subject.trim(), req.body.trim())?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id })).into_response()).into_response())
}

async fn enquiry(State(st): State<AppState>, user: AuthUser, Path(id): Path<i64>) -> Result<Response, ApiError> {
    match st.store.enquiry(id)? {
        Some(e) if e.user_id == user.id => Ok(Json(e).into_response()),
        _ => Err(ApiError::not_found("unknown_enquiry", format!("no enquiry {id}"))),
    }
}

async fn profile(State(st): State<AppState>, user: AuthUser) -> Result<Json<Profile>, ApiError> {
    let u = st.store.user_by_id(user.id)?.ok_or_else(ApiError::unauthorized)?;
    Ok(Json(u.into()))
}

#[derive(Deserialize)]
struct ProfileUpdate {
    #[serde(default)]
    email: Option<String>,
    #[serde(default, alias = "name")]
    display_name: Option<String>,
    #[serde(default)]
    password: Option<String>,
}

async fn update_profile(
    State(st): State<AppState>,
    user: AuthUser,
    ApiJson(req): ApiJson<ProfileUpdate>,
) -> Result<Json<Profile>, ApiError> {
    let email = req
        .email
        .as_deref()
        .map(|e| normalize_email(e).ok_or_else(invalid_email))
        .transpose()?;
    let name = req
        .display_name
        .map(|n| {
            let n = n.trim().to_string();
            if n.is_empty() {
                Err(ApiError::unprocessable("invalid_name", "display name must not be empty"))
            } else {
                Ok(n)
            }
        })
        .transpose()?;
    if req.password.as_deref().is_some_and(|p| !password_is_acceptable(p)) {
        return Err(weak_password());
    }
    blocking(move || {
        let hash = req.password.as_deref().map(hash_password).transpose()?;
        st.store
            .update_user(user.id, email.as_deref(), name.as_deref(), hash.as_deref())?;
        let u = st.store.user_by_id(user.id)?.ok_or_else(ApiError::unauthorized)?;
        Ok(Json(u.into()))
    })
    .await
}

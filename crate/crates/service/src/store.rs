//! SQLite persistence: users, tokens, price rows, artifact index, forecast
//! cache, enquiries and training jobs.

use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use agriprice_core::ingest::{frame_from_records, records_from_frame, RawRecord};
use agriprice_core::{Error as CoreError, FeatureFrame};
use chrono::{NaiveDate, Utc};
use rusqlite::{params, Connection, OptionalExtension};

use crate::error::{ServiceError, ServiceResult};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS users (
    id INTEGER PRIMARY KEY,
    email TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL,
    display_name TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tokens (
    token_hash TEXT PRIMARY KEY,
    user_id INTEGER NOT NULL REFERENCES users(id),
    expires_at INTEGER NOT NULL,
    revoked INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS commodities (
    name TEXT PRIMARY KEY,
    fingerprint TEXT NOT NULL,
    updated_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS series (
    commodity TEXT NOT NULL REFERENCES commodities(name),
    date TEXT NOT NULL,
    price REAL,
    temperature REAL,
    humidity REAL,
    precipitation REAL,
    crude_oil REAL,
    PRIMARY KEY (commodity, date)
);
CREATE TABLE IF NOT EXISTS artifacts (
    commodity TEXT NOT NULL,
    mode TEXT NOT NULL,
    family TEXT NOT NULL,
    fingerprint TEXT NOT NULL,
    content_hash TEXT NOT NULL,
    path TEXT NOT NULL,
    created_at TEXT NOT NULL,
    PRIMARY KEY (commodity, mode)
);
CREATE TABLE IF NOT EXISTS forecast_cache (
    commodity TEXT NOT NULL,
    mode TEXT NOT NULL,
    family TEXT NOT NULL,
    fingerprint TEXT NOT NULL,
    values_json TEXT NOT NULL,
    generated_at TEXT NOT NULL,
    PRIMARY KEY (commodity, mode)
);
CREATE TABLE IF NOT EXISTS enquiries (
    id INTEGER PRIMARY KEY,
    user_id INTEGER NOT NULL REFERENCES users(id),
    subject TEXT NOT NULL,
    body TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS jobs (
    id TEXT PRIMARY KEY,
    commodity TEXT NOT NULL,
    mode TEXT NOT NULL,
    status TEXT NOT NULL,
    error TEXT,
    created_at TEXT NOT NULL,
    finished_at TEXT
);
";

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: i64,
    pub email: String,
    pub password_hash: String,
    pub display_name: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactRow {
    pub family: String,
    pub fingerprint: String,
    pub content_hash: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedForecast {
    pub family: String,
    pub fingerprint: String,
    pub values: Vec<f64>,
    pub generated_at: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct JobRow {
    pub id: String,
    pub commodity: String,
    pub mode: String,
    pub status: String,
    pub error: Option<String>,
    pub created_at: String,
    pub finished_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Enquiry {
    pub id: i64,
    pub user_id: i64,
    pub subject: String,
    pub body: String,
    pub created_at: String,
}

pub struct Store {
    conn: Mutex<Connection>,
}

fn now() -> String {
    Utc::now().to_rfc3339()
}

fn is_unique_violation(e: &rusqlite::Error) -> bool {
    matches!(
        e,
        rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::ConstraintViolation
    )
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> ServiceResult<Self> {
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> ServiceResult<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> ServiceResult<Self> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
        })
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        // a panic while holding the lock cannot leave SQLite inconsistent:
        // every multi-statement write runs in a transaction
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create_user(&self, email: &str, password_hash: &str, display_name: &str) -> ServiceResult<i64> {
        let conn = self.conn();
        match conn.execute(
            "INSERT INTO users (email, password_hash, display_name, created_at) VALUES (?1, ?2, ?3, ?4)",
            params![email, password_hash, display_name, now()],
        ) {
            Ok(_) => Ok(conn.last_insert_rowid()),
            Err(e) if is_unique_violation(&e) => Err(ServiceError::DuplicateEmail),
            Err(e) => Err(e.into()),
        }
    }

    fn user_where(&self, clause: &str, arg: &dyn rusqlite::ToSql) -> ServiceResult<Option<User>> {
        let sql = format!("SELECT id, email, password_hash, display_name, created_at FROM users WHERE {clause}");
        Ok(self
            .conn()
            .query_row(&sql, [arg], |r| {
                Ok(User {
                    id: r.get(0)?,
                    email: r.get(1)?,
                    password_hash: r.get(2)?,
                    display_name: r.get(3)?,
                    created_at: r.get(4)?,
                })
            })
            .optional()?)
    }

    pub fn user_by_email(&self, email: &str) -> ServiceResult<Option<User>> {
        self.user_where("email = ?1", &email)
    }

    pub fn user_by_id(&self, id: i64) -> ServiceResult<Option<User>> {
        self.user_where("id = ?1", &id)
    }

    pub fn update_user(
        &self,
        id: i64,
        email: Option<&str>,
        display_name: Option<&str>,
        password_hash: Option<&str>,
    ) -> ServiceResult<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        if let Some(e) = email {
            match tx.execute("UPDATE users SET email = ?1 WHERE id = ?2", params![e, id]) {
                Err(err) if is_unique_violation(&err) => return Err(ServiceError::DuplicateEmail),
                other => {
                    other?;
                }
            }
        }
        if let Some(n) = display_name {
            tx.execute("UPDATE users SET display_name = ?1 WHERE id = ?2", params![n, id])?;
        }
        if let Some(h) = password_hash {
            tx.execute("UPDATE users SET password_hash = ?1 WHERE id = ?2", params![h, id])?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn insert_token(&self, token_hash: &str, user_id: i64, expires_at: i64) -> ServiceResult<()> {
        self.conn().execute(
            "INSERT INTO tokens (token_hash, user_id, expires_at) VALUES (?1, ?2, ?3)",
            params![token_hash, user_id, expires_at],
        )?;
        Ok(())
    }

    /// The owner of a live (unexpired, unrevoked) token.
    pub fn token_user(&self, token_hash: &str, now_unix: i64) -> ServiceResult<Option<i64>> {
        Ok(self
            .conn()
            .query_row(
                "SELECT user_id FROM tokens WHERE token_hash = ?1 AND revoked = 0 AND expires_at > ?2",
                params![token_hash, now_unix],
                |r| r.get(0),
            )
            .optional()?)
    }

    pub fn revoke_token(&self, token_hash: &str) -> ServiceResult<bool> {
        Ok(self
            .conn()
            .execute("UPDATE tokens SET revoked = 1 WHERE token_hash = ?1", [token_hash])?
            > 0)
    }

    /// Replaces the stored rows of `commodity` with `frame` and records the
    /// data fingerprint used to validate cached models.
    pub fn put_series(&self, commodity: &str, frame: &FeatureFrame, fingerprint: &str) -> ServiceResult<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute(
            "INSERT INTO commodities (name, fingerprint, updated_at) VALUES (?1, ?2, ?3)
             ON CONFLICT(name) DO UPDATE SET fingerprint = excluded.fingerprint, updated_at = excluded.updated_at",
            params![commodity, fingerprint, now()],
        )?;
        tx.execute("DELETE FROM series WHERE commodity = ?1", [commodity])?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO series (commodity, date, price, temperature, humidity, precipitation, crude_oil)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            )?;
            for r in records_from_frame(frame, commodity) {
                stmt.execute(params![
                    commodity,
                    r.date.format("%Y-%m-%d").to_string(),
                    r.price_myr,
                    r.temperature_c,
                    r.humidity_pct,
                    r.precipitation_mm,
                    r.crude_oil_usd
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    pub fn commodities(&self) -> ServiceResult<Vec<String>> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT name FROM commodities ORDER BY name")?;
        let names = stmt.query_map([], |r| r.get(0))?.collect::<Result<Vec<String>, _>>()?;
        Ok(names)
    }

    pub fn fingerprint(&self, commodity: &str) -> ServiceResult<Option<String>> {
        Ok(self
            .conn()
            .query_row("SELECT fingerprint FROM commodities WHERE name = ?1", [commodity], |r| r.get(0))
            .optional()?)
    }

    fn records(&self, commodity: &str, from: Option<NaiveDate>, to: Option<NaiveDate>) -> ServiceResult<Vec<RawRecord>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT date, price, temperature, humidity, precipitation, crude_oil FROM series
             WHERE commodity = ?1 AND date >= ?2 AND date <= ?3 ORDER BY date",
        )?;
        let lo = from.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default();
        let hi = to.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_else(|| "9999-12-31".into());
        let rows = stmt
            .query_map(params![commodity, lo, hi], |r| {
                let date: String = r.get(0)?;
                let date = NaiveDate::parse_from_str(&date, "%Y-%m-%d").map_err(|e| {
                    rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
                })?;
                Ok(RawRecord {
                    date,
                    commodity: commodity.to_string(),
                    price_myr: r.get(1)?,
                    temperature_c: r.get(2)?,
                    humidity_pct: r.get(3)?,
                    precipitation_mm: r.get(4)?,
                    crude_oil_usd: r.get(5)?,
                })
            })?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rows)
    }

    /// The full stored frame, rebuilt through the ingestion path.
    pub fn load_frame(&self, commodity: &str) -> ServiceResult<FeatureFrame> {
        let records = self.records(commodity, None, None)?;
        if records.is_empty() {
            return Err(CoreError::UnknownCommodity(commodity.to_string()).into());
        }
        Ok(frame_from_records(commodity, &records)?.frame)
    }

    /// Raw rows within an optional date range.
    pub fn series_rows(&self, commodity: &str, from: Option<NaiveDate>, to: Option<NaiveDate>) -> ServiceResult<Vec<RawRecord>> {
        if self.fingerprint(commodity)?.is_none() {
            return Err(CoreError::UnknownCommodity(commodity.to_string()).into());
        }
        self.records(commodity, from, to)
    }

    /// The last `count` rows in chronological order.
    pub fn tail_rows(&self, commodity: &str, count: usize) -> ServiceResult<Vec<RawRecord>> {
        let first: Option<String> = self
            .conn()
            .query_row(
                "SELECT date FROM series WHERE commodity = ?1 ORDER BY date DESC LIMIT 1 OFFSET ?2",
                params![commodity, count.saturating_sub(1) as i64],
                |r| r.get(0),
            )
            .optional()?;
        let from = first.and_then(|d| NaiveDate::parse_from_str(&d, "%Y-%m-%d").ok());
        self.records(commodity, from, None)
    }

    pub fn put_artifact(&self, commodity: &str, mode: &str, row: &ArtifactRow) -> ServiceResult<()> {
        self.conn().execute(
            "INSERT OR REPLACE INTO artifacts (commodity, mode, family, fingerprint, content_hash, path, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            params![commodity, mode, row.family, row.fingerprint, row.content_hash, row.path, now()],
        )?;
        Ok(())
    }

    pub fn artifact(&self, commodity: &str, mode: &str) -> ServiceResult<Option<ArtifactRow>> {
        Ok(self
            .conn()
            .query_row(
                "SELECT family, fingerprint, content_hash, path FROM artifacts WHERE commodity = ?1 AND mode = ?2",
                params![commodity, mode],
                |r| {
                    Ok(ArtifactRow {
                        family: r.get(0)?,
                        fingerprint: r.get(1)?,
                        content_hash: r.get(2)?,
                        path: r.get(3)?,
                    })
                },
            )
            .optional()?)
    }

    pub fn put_forecast(&self, commodity: &str, mode: &str, family: &str, fingerprint: &str, values: &[f64]) -> ServiceResult<()> {
        let json = serde_json::to_string(values).expect("finite floats serialize");
        self.conn().execute(
            "INSERT OR REPLACE INTO forecast_cache (commodity, mode, family, fingerprint, values_json, generated_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![commodity, mode, family, fingerprint, json, now()],
        )?;
        Ok(())
    }

    pub fn cached_forecast(&self, commodity: &str, mode: &str) -> ServiceResult<Option<CachedForecast>> {
        let row: Option<(String, String, String, String)> = self
            .conn()
            .query_row(
                "SELECT family, fingerprint, values_json, generated_at FROM forecast_cache
                 WHERE commodity = ?1 AND mode = ?2",
                params![commodity, mode],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?;
        Ok(match row {
            Some((family, fingerprint, json, generated_at)) => Some(CachedForecast {
                family,
                fingerprint,
                values: serde_json::from_str(&json).map_err(CoreError::from)?,
                generated_at,
            }),
            None => None,
        })
    }

    pub fn insert_enquiry(&self, user_id: i64, subject: &str, body: &str) -> ServiceResult<i64> {
        let conn = self.conn();
        conn.execute(
            "INSERT INTO enquiries (user_id, subject, body, created_at) VALUES (?1, ?2, ?3, ?4)",
            params![user_id, subject, body, now()],
        )?;
        Ok(conn.last_insert_rowid())
    }

    pub fn enquiry(&self, id: i64) -> ServiceResult<Option<Enquiry>> {
        Ok(self
            .conn()
            .query_row(
                "SELECT id, user_id, subject, body, created_at FROM enquiries WHERE id = ?1",
                [id],
                |r| {
                    Ok(Enquiry {
                        id: r.get(0)?,
                        user_id: r.get(1)?,
                        subject: r.get(2)?,
                        body: r.get(3)?,
                        created_at: r.get(4)?,
                    })
                },
            )
            .optional()?)
    }

    pub fn create_job(&self, id: &str, commodity: &str, mode: &str) -> ServiceResult<()> {
        self.conn().execute(
            "INSERT INTO jobs (id, commodity, mode, status, created_at) VALUES (?1, ?2, ?3, 'queued', ?4)",
            params![id, commodity, mode, now()],
        )?;
        Ok(())
    }

    pub fn set_job_status(&self, id: &str, status: &str, error: Option<&str>) -> ServiceResult<()> {
        let finished = matches!(status, "done" | "failed").then(now);
        self.conn().execute(
            "UPDATE jobs SET status = ?2, error = ?3, finished_at = ?4 WHERE id = ?1",
            params![id, status, error, finished],
        )?;
        Ok(())
    }

    /// Marks queued or running jobs failed; used at startup, when no worker
    /// can still own them.
    pub fn fail_unfinished_jobs(&self) -> ServiceResult<usize> {
        Ok(self.conn().execute(
            "UPDATE jobs SET status = 'failed', error = 'interrupted by restart', finished_at = ?1
             WHERE status IN ('queued', 'running')",
            [now()],
        )?)
    }

    pub fn job(&self, id: &str) -> ServiceResult<Option<JobRow>> {
        self.job_where("id = ?1", params![id])
    }

    /// A queued or running job for the pair, if any.
    pub fn active_job(&self, commodity: &str, mode: &str) -> ServiceResult<Option<JobRow>> {
        self.job_where(
            "commodity = ?1 AND mode = ?2 AND status IN ('queued', 'running') ORDER BY created_at LIMIT 1",
            params![commodity, mode],
        )
    }

    fn job_where(&self, clause: &str, args: &[&dyn rusqlite::ToSql]) -> ServiceResult<Option<JobRow>> {
        let sql = format!("SELECT id, commodity, mode, status, error, created_at, finished_at FROM jobs WHERE {clause}");
        Ok(self
            .conn()
            .query_row(&sql, args, |r| {
                Ok(JobRow {
                    id: r.get(0)?,
                    commodity: r.get(1)?,
                    mode: r.get(2)?,
                    status: r.get(3)?,
                    error: r.get(4)?,
                    created_at: r.get(5)?,
                    finished_at: r.get(6)?,
                })
            })
            .optional()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use agriprice_core::ingest::{generate_synthetic, SyntheticSpec};

    #[test]
    fn series_round_trip_and_duplicates() {
        let store = Store::open_in_memory().unwrap();
        let mut spec = SyntheticSpec::preset("chili", 1).unwrap();
        spec.n_weeks = 60;
        let frame = generate_synthetic(&spec).unwrap();
        store.put_series("chili", &frame, "abc").unwrap();
        assert_eq!(store.load_frame("chili").unwrap(), frame);
        assert_eq!(store.commodities().unwrap(), vec!["chili"]);
        assert_eq!(store.tail_rows("chili", 5).unwrap().len(), 5);
        assert!(matches!(
            store.load_frame("durian"),
            Err(ServiceError::Core(CoreError::UnknownCommodity(_)))
        ));

        store.create_user("a@b.co", "h", "A").unwrap();
        assert!(matches!(store.create_user("a@b.co", "h", "B"), Err(ServiceError::DuplicateEmail)));
    }

    #[test]
    fn tokens_expire_and_revoke() {
        let store = Store::open_in_memory().unwrap();
        let uid = store.create_user("x@y.org", "h", "X").unwrap();
        store.insert_token("t1", uid, 100).unwrap();
        assert_eq!(store.token_user("t1", 99).unwrap(), Some(uid));
        assert_eq!(store.token_user("t1", 100).unwrap(), None);
        assert!(store.revoke_token("t1").unwrap());
        assert_eq!(store.token_user("t1", 0).unwrap(), None);
    }
}

//! On-disk persistence for reports and page snapshots.
//!
//! Layout: `<root>/reports/<check_id>.json` for reports and
//! `<root>/blobs/<2-char shard>/<hash>` for snapshot bodies, with a `.json`
//! sidecar per blob carrying the snapshot metadata. Bodies are
//! content-addressed by their SHA-256, so identical bodies across checks
//! share one blob. Writes go through a temp file and rename.

use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fetch::snapshot_id as hash_body;
use crate::model::{ComplianceReport, Link, PageSnapshot};

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt entry at {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Snapshot fields other than the body; the body lives in the blob file.
#[derive(Serialize, Deserialize)]
struct SnapshotMeta {
    requested_url: String,
    final_url: String,
    http_status: u16,
    fetched_at: DateTime<Utc>,
    content_type: String,
    text: String,
    links: Vec<Link>,
    phone_numbers: Vec<String>,
    depth: u32,
}

pub struct Archive {
    root: PathBuf,
}

impl Archive {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Archive { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn report_path(&self, check_id: &str) -> PathBuf {
        self.root.join("reports").join(format!("{check_id}.json"))
    }

    fn blob_path(&self, snapshot_id: &str) -> PathBuf {
        self.root
            .join("blobs")
            .join(&snapshot_id[..2])
            .join(snapshot_id)
    }

    /// Persist the report and its snapshots; returns the check id.
    pub fn store(
        &self,
        report: &ComplianceReport,
        snapshots: &[PageSnapshot],
    ) -> Result<String, ArchiveError> {
        for snapshot in snapshots {
            let blob = self.blob_path(&snapshot.snapshot_id);
            if let Some(parent) = blob.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            if !blob.exists() {
                write_atomic(&blob, &snapshot.body)?;
            }
            let meta_path = blob.with_extension("json");
            if !meta_path.exists() {
                let meta = SnapshotMeta {
                    requested_url: snapshot.requested_url.clone(),
                    final_url: snapshot.final_url.clone(),
                    http_status: snapshot.http_status,
                    fetched_at: snapshot.fetched_at,
                    content_type: snapshot.content_type.clone(),
                    text: snapshot.text.clone(),
                    links: snapshot.links.clone(),
                    phone_numbers: snapshot.phone_numbers.clone(),
                    depth: snapshot.depth,
                };
                let bytes = serde_json::to_vec_pretty(&meta).expect("snapshot meta serializes");
                write_atomic(&meta_path, &bytes)?;
            }
        }
        let report_path = self.report_path(&report.check_id);
        if let Some(parent) = report_path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let bytes = serde_json::to_vec_pretty(report).expect("report serializes");
        write_atomic(&report_path, &bytes)?;
        Ok(report.check_id.clone())
    }

    pub fn load(&self, check_id: &str) -> Result<ComplianceReport, ArchiveError> {
        if !valid_check_id(check_id) {
            return Err(ArchiveError::NotFound(check_id.to_string()));
        }
        let path = self.report_path(check_id);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(ArchiveError::NotFound(check_id.to_string()));
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_slice(&bytes).map_err(|e| ArchiveError::Corrupt {
            path,
            detail: e.to_string(),
        })
    }

    pub fn load_snapshot(&self, snapshot_id: &str) -> Result<PageSnapshot, ArchiveError> {
        if !valid_snapshot_id(snapshot_id) {
            return Err(ArchiveError::NotFound(snapshot_id.to_string()));
        }
        let blob_path = self.blob_path(snapshot_id);
        let body = match std::fs::read(&blob_path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(ArchiveError::NotFound(snapshot_id.to_string()));
            }
            Err(e) => return Err(io_err(&blob_path)(e)),
        };
        if hash_body(&body) != snapshot_id {
            return Err(ArchiveError::Corrupt {
                path: blob_path,
                detail: "body hash does not match snapshot id".into(),
            });
        }
        let meta_path = blob_path.with_extension("json");
        let meta_bytes = std::fs::read(&meta_path).map_err(io_err(&meta_path))?;
        let meta: SnapshotMeta =
            serde_json::from_slice(&meta_bytes).map_err(|e| ArchiveError::Corrupt {
                path: meta_path,
                detail: e.to_string(),
            })?;
        Ok(PageSnapshot {
            snapshot_id: snapshot_id.to_string(),
            requested_url: meta.requested_url,
            final_url: meta.final_url,
            http_status: meta.http_status,
            fetched_at: meta.fetched_at,
            content_type: meta.content_type,
            body,
            text: meta.text,
            links: meta.links,
            phone_numbers: meta.phone_numbers,
            depth: meta.depth,
        })
    }
}

fn valid_check_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn valid_snapshot_id(id: &str) -> bool {
    id.len() == 64
        && id
            .chars()
            .all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase())
}

/// Write-temp-rename so concurrent stores of identical content are benign.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ArchiveError> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

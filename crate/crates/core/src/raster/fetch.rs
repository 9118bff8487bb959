//! Cached tile retrieval. The HTTP client itself is pluggable through
//! [`TileTransport`] so the core crate stays free of network dependencies.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::tiles::TileCoord;
use super::RasterError;

pub const CACHE_ENV: &str = "PEDNET_TILE_CACHE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: Vec<u8>,
    pub etag: Option<String>,
}

pub trait TileTransport: Send + Sync {
    /// GET `url`, sending `If-None-Match` when `etag` is given. Errors are
    /// connection-level failures; HTTP statuses come back in the response.
    fn get(&self, url: &str, etag: Option<&str>) -> Result<TransportResponse, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOptions {
    /// URL with `{z}`, `{x}`, `{y}` or `{q}` placeholders.
    pub template: String,
    pub cache_dir: PathBuf,
    pub concurrency: usize,
    /// Serve from cache only.
    pub offline: bool,
    /// Re-request cached tiles that carry an ETag.
    pub revalidate: bool,
}

impl FetchOptions {
    pub fn new(template: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            template: template.into(),
            cache_dir: cache_dir.into(),
            concurrency: 4,
            offline: false,
            revalidate: false,
        }
    }
}

/// Cache directory: `PEDNET_TILE_CACHE` if set, else `configured`, else a
/// per-user cache directory.
pub fn resolve_cache_dir(configured: Option<&Path>) -> PathBuf {
    if let Some(v) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(v);
    }
    if let Some(p) = configured {
        return p.to_path_buf();
    }
    let base = std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .unwrap_or_else(std::env::temp_dir);
    base.join("pednet").join("tiles")
}

pub struct TileFetcher {
    opts: FetchOptions,
    transport: Arc<dyn TileTransport>,
    host: String,
    ext: String,
}

impl TileFetcher {
    pub fn new(opts: FetchOptions, transport: Arc<dyn TileTransport>) -> Result<Self, RasterError> {
        let t = &opts.template;
        let has_xyz = ["{z}", "{x}", "{y}"].iter().all(|p| t.contains(p));
        if !(has_xyz || t.contains("{q}")) {
            return Err(RasterError::InvalidTemplate(t.clone()));
        }
        let host = template_host(t).ok_or_else(|| RasterError::InvalidTemplate(t.clone()))?;
        let ext = t
            .rsplit('/')
            .next()
            .and_then(|last| last.split('?').next())
            .and_then(|last| last.rsplit_once('.'))
            .map(|(_, e)| e)
            .filter(|e| !e.is_empty() && e.chars().all(|c| c.is_ascii_alphanumeric()))
            .unwrap_or("img")
            .to_string();
        Ok(Self {
            opts,
            transport,
            host,
            ext,
        })
    }

    pub fn url(&self, t: TileCoord) -> String {
        self.opts
            .template
            .replace("{z}", &t.z.to_string())
            .replace("{x}", &t.x.to_string())
            .replace("{y}", &t.y.to_string())
            .replace("{q}", &t.quadkey())
    }

    pub fn cache_path(&self, t: TileCoord) -> PathBuf {
        self.opts
            .cache_dir
            .join(&self.host)
            .join(t.z.to_string())
            .join(t.x.to_string())
            .join(format!("{}.{}", t.y, self.ext))
    }

    fn etag_path(&self, t: TileCoord) -> PathBuf {
        let p = self.cache_path(t);
        p.with_extension(format!("{}.etag", self.ext))
    }

    fn fetch_one(&self, t: TileCoord) -> Result<PathBuf, RasterError> {
        let path = self.cache_path(t);
        let cached = path.is_file();
        let etag = if cached {
            std::fs::read_to_string(self.etag_path(t)).ok()
        } else {
            None
        };
        if cached && (self.opts.offline || !self.opts.revalidate || etag.is_none()) {
            return Ok(path);
        }
        if self.opts.offline {
            return Err(RasterError::OfflineCacheMiss(t.to_string()));
        }
        let resp = self
            .transport
            .get(&self.url(t), etag.as_deref())
            .map_err(|reason| RasterError::Transport {
                tile: t.to_string(),
                reason,
            })?;
        match resp.status {
            304 if cached => Ok(path),
            200..=299 => {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                atomic_write(&path, &resp.body)?;
                if let Some(tag) = &resp.etag {
                    atomic_write(&self.etag_path(t), tag.as_bytes())?;
                }
                Ok(path)
            }
            status => Err(RasterError::Http {
                status,
                tile: t.to_string(),
            }),
        }
    }

    /// Local paths for `tiles`, in order. At most `concurrency` requests are
    /// in flight; the first error (in tile order) is returned.
    pub fn fetch(&self, tiles: &[TileCoord]) -> Result<Vec<PathBuf>, RasterError> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<PathBuf, RasterError>>>> =
            Mutex::new((0..tiles.len()).map(|_| None).collect());
        let workers = self.opts.concurrency.clamp(1, tiles.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= tiles.len() {
                        break;
                    }
                    let r = self.fetch_one(tiles[i]);
                    results.lock().expect("results lock")[i] = Some(r);
                });
            }
        });
        results
            .into_inner()
            .expect("results lock")
            .into_iter()
            .map(|r| r.expect("every tile visited"))
            .collect()
    }
}

fn template_host(t: &str) -> Option<String> {
    let rest = t.split_once("://").map(|(_, r)| r)?;
    let host = rest.split('/').next()?.split('@').next_back()?;
    let host: String = host
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    (!host.is_empty()).then_some(host)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("part{}-{}", std::process::id(), n));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

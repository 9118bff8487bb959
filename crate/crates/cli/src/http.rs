//! Blocking HTTP transport for the tile fetcher.

use std::time::Duration;

use pednet_core::raster::{TileTransport, TransportResponse};
use reqwest::blocking::Client;
use reqwest::header::{ETAG, IF_NONE_MATCH, USER_AGENT};

pub struct HttpTransport {
    client: Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, String> {
        let client = Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { client })
    }
}

impl TileTransport for HttpTransport {
    fn get(&self, url: &str, etag: Option<&str>) -> Result<TransportResponse, String> {
        let mut req = self
            .client
            .get(url)
            .header(USER_AGENT, concat!("pednet/", env!("CARGO_PKG_VERSION")));
        if let Some(tag) = etag {
            req = req.header(IF_NONE_MATCH, tag);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let etag = resp
            .headers()
            .get(ETAG)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = resp.bytes().map_err(|e| e.to_string())?.to_vec();
        Ok(TransportResponse { status, body, etag })
    }
}

//! Local HTTP tile service over a synthetic scenario, honoring the
//! `?lat=..&long=..&z=..&n=..` capture contract. Lets the HTTP provider be
//! exercised fully offline.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::NaiveDateTime;
use log::{info, warn};
use tiny_http::{Header, Response, Server};

use crate::error::{Error, Result};
use crate::geo_grid::{GeoPoint, TileDescriptor};
use crate::synthmap::Scenario;

/// Running synthetic tile server; stops on drop.
pub struct SynthServer {
    addr: String,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl SynthServer {
    /// Bind to `127.0.0.1:port` (0 picks a free port) and serve tiles.
    /// Requests may carry an optional `t` parameter
    /// (`YYYY-MM-DDTHH:MM`); it defaults to the scenario start.
    pub fn start(scenario: Scenario, port: u16) -> Result<Self> {
        scenario.validate()?;
        let server = Server::http(("127.0.0.1", port))
            .map_err(|e| Error::Config(format!("cannot bind synth server: {e}")))?;
        let addr = format!("http://{}", server.server_addr());
        let stop = Arc::new(AtomicBool::new(false));
        let stop2 = Arc::clone(&stop);
        let handle = std::thread::spawn(move || {
            while !stop2.load(Ordering::Relaxed) {
                match server.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(request)) => {
                        let url = request.url().to_string();
                        match render_for_url(&scenario, &url) {
                            Ok(png) => {
                                let header =
                                    Header::from_bytes("Content-Type", "image/png").unwrap();
                                let _ = request.respond(Response::from_data(png).with_header(header));
                            }
                            Err(e) => {
                                warn!("synth server rejecting {url}: {e}");
                                let _ = request.respond(
                                    Response::from_string(format!("bad request: {e}"))
                                        .with_status_code(400),
                                );
                            }
                        }
                    }
                    Ok(None) => {}
                    Err(e) => {
                        warn!("synth server receive error: {e}");
                        break;
                    }
                }
            }
        });
        info!("synthetic tile server listening on {addr}");
        Ok(SynthServer {
            addr,
            stop,
            handle: Some(handle),
        })
    }

    /// Base URL, e.g. `http://127.0.0.1:45123`.
    pub fn base_url(&self) -> &str {
        &self.addr
    }
}

impl Drop for SynthServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn render_for_url(scenario: &Scenario, url: &str) -> Result<Vec<u8>> {
    let query = url.split_once('?').map(|(_, q)| q).unwrap_or("");
    let mut lat = None;
    let mut long = None;
    let mut zoom = None;
    let mut n_pix = None;
    let mut t = None;
    for pair in query.split('&') {
        let Some((k, v)) = pair.split_once('=') else { continue };
        match k {
            "lat" => lat = v.parse::<f64>().ok(),
            "long" => long = v.parse::<f64>().ok(),
            "z" => zoom = v.parse::<u8>().ok(),
            "n" => n_pix = v.parse::<u32>().ok(),
            "t" => {
                t = NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M")
                    .or_else(|_| NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M:%S"))
                    .ok()
            }
            _ => {}
        }
    }
    let (Some(lat), Some(long), Some(zoom), Some(n_pix)) = (lat, long, zoom, n_pix) else {
        return Err(Error::Config(
            "query must carry lat, long, z and n parameters".into(),
        ));
    };
    let tile = TileDescriptor {
        i: 1,
        j: 1,
        center: GeoPoint::new(lat, long)?,
        zoom,
        n_pix,
    };
    scenario.render_tile(&tile, t.unwrap_or(scenario.start))
}

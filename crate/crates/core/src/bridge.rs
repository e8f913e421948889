//! Client side of the external estimator protocol.
//!
//! Frames travel over one TCP connection: a 4-byte big-endian length
//! followed by that many bytes of UTF-8 JSON. Every frame is an object with
//! a `type` of `estimate_request`, `estimate_response` or `error`:
//!
//! ```json
//! {"type":"estimate_request","rows":32,"cols":32,"y_matrix":[...],"mask":[...]}
//! {"type":"estimate_response","mean_map":[...],"uncertainty_map":[...]}
//! {"type":"error","message":"..."}
//! ```
//!
//! Requests and responses strictly alternate; there is no pipelining.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GridGeometry, Point2};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Frames larger than this are rejected as malformed.
pub const MAX_FRAME_BYTES: u32 = 64 << 20;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot connect to estimator at {endpoint}: {source}")]
    Connect {
        endpoint: String,
        #[source]
        source: io::Error,
    },
    #[error("estimator timed out")]
    Timeout,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("response violates contract: {0}")]
    Contract(String),
    #[error("estimator reported: {0}")]
    Remote(String),
    #[error("connection closed by peer")]
    Closed,
    #[error("bridge i/o: {0}")]
    Io(io::Error),
}

impl From<io::Error> for BridgeError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => BridgeError::Timeout,
            io::ErrorKind::UnexpectedEof => BridgeError::Closed,
            _ => BridgeError::Io(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRequest {
    pub rows: usize,
    pub cols: usize,
    /// Row-major averaged measurements, dB; 0 where unobserved.
    pub y_matrix: Vec<f64>,
    /// Row-major: 1 measured, 0 unobserved, -1 building.
    pub mask: Vec<i8>,
}

impl EstimateRequest {
    pub fn validate(&self) -> Result<(), BridgeError> {
        let n = self.rows * self.cols;
        for len in [self.y_matrix.len(), self.mask.len()] {
            if len != n {
                return Err(BridgeError::ShapeMismatch { expected: n, actual: len });
            }
        }
        if let Some(m) = self.mask.iter().find(|m| !matches!(m, -1..=1)) {
            return Err(BridgeError::MalformedFrame(format!("mask value {m} not in {{-1, 0, 1}}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResponse {
    pub mean_map: Vec<f64>,
    pub uncertainty_map: Vec<f64>,
}

impl EstimateResponse {
    pub fn validate_for(&self, req: &EstimateRequest) -> Result<(), BridgeError> {
        let n = req.rows * req.cols;
        for len in [self.mean_map.len(), self.uncertainty_map.len()] {
            if len != n {
                return Err(BridgeError::ShapeMismatch { expected: n, actual: len });
            }
        }
        if let Some((k, u)) = self
            .uncertainty_map
            .iter()
            .enumerate()
            .find(|(_, u)| !(**u >= 0.0))
        {
            return Err(BridgeError::Contract(format!("uncertainty {u} at index {k}")));
        }
        if self.mean_map.iter().any(|v| !v.is_finite()) {
            return Err(BridgeError::Contract("non-finite mean value".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Frame {
    EstimateRequest(EstimateRequest),
    EstimateResponse(EstimateResponse),
    Error { message: String },
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let body = serde_json::to_vec(frame).expect("frames always serialize");
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn decode_body(body: &[u8]) -> Result<Frame, BridgeError> {
    serde_json::from_slice(body).map_err(|e| BridgeError::MalformedFrame(e.to_string()))
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), BridgeError> {
    w.write_all(&encode_frame(frame))?;
    w.flush()?;
    Ok(())
}

/// Reads one frame body; `Ok(None)` on a clean end of stream.
pub fn read_body<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, BridgeError> {
    let mut len = [0u8; 4];
    match r.read(&mut len[..1])? {
        0 => return Ok(None),
        _ => r.read_exact(&mut len[1..])?,
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(BridgeError::MalformedFrame(format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, BridgeError> {
    let body = read_body(r)?.ok_or(BridgeError::Closed)?;
    decode_body(&body)
}

/// Per-grid-point averages of the measurements nearest to each grid point,
/// with the mask plane (1 measured, 0 unobserved, -1 building).
pub fn build_observation_planes(samples: &[(Point2, f64)], grid: &GridGeometry) -> (Vec<f64>, Vec<i8>) {
    let n = grid.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (p, v) in samples {
        let k = grid.nearest_index(p);
        sum[k] += v;
        count[k] += 1;
    }
    let mut y = vec![0.0; n];
    let mut mask = vec![0i8; n];
    for k in 0..n {
        if grid.is_building(k) {
            mask[k] = -1;
        } else if count[k] > 0 {
            y[k] = sum[k] / count[k] as f64;
            mask[k] = 1;
        }
    }
    (y, mask)
}

/// One connection to an estimator service.
#[derive(Debug)]
pub struct BridgeClient {
    stream: TcpStream,
}

impl BridgeClient {
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, BridgeError> {
        let connect_err = |source| BridgeError::Connect {
            endpoint: endpoint.to_string(),
            source,
        };
        let addrs: Vec<SocketAddr> = endpoint.to_socket_addrs().map_err(connect_err)?.collect();
        let mut last = io::Error::new(io::ErrorKind::InvalidInput, "no address resolved");
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout))?;
                    stream.set_write_timeout(Some(timeout))?;
                    stream.set_nodelay(true)?;
                    return Ok(Self { stream });
                }
                Err(e) => last = e,
            }
        }
        if matches!(last.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
            return Err(BridgeError::Timeout);
        }
        Err(connect_err(last))
    }

    pub fn request_estimate(&mut self, req: &EstimateRequest) -> Result<EstimateResponse, BridgeError> {
        req.validate()?;
        write_frame(&mut self.stream, &Frame::EstimateRequest(req.clone()))?;
        match read_frame(&mut self.stream)? {
            Frame::EstimateResponse(resp) => {
                resp.validate_for(req)?;
                Ok(resp)
            }
            Frame::Error { message } => Err(BridgeError::Remote(message)),
            Frame::EstimateRequest(_) => Err(BridgeError::MalformedFrame("unexpected request frame".into())),
        }
    }
}

pub fn request_estimate(endpoint: &str, req: &EstimateRequest) -> Result<EstimateResponse, BridgeError> {
    BridgeClient::connect(endpoint, DEFAULT_TIMEOUT)?.request_estimate(req)
}

/// In-process loopback estimator for tests and dry runs. Serves connections
/// one after another, answering each request with `handler`; malformed
/// frames get an error frame and the connection stays open.
pub struct StubServer {
    addr: SocketAddr,
    _handle: JoinHandle<()>,
}

impl StubServer {
    pub fn spawn<F>(handler: F) -> io::Result<Self>
    where
        F: Fn(&EstimateRequest) -> Frame + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                let Ok(mut conn) = conn else { continue };
                loop {
                    let reply = match read_body(&mut conn) {
                        Ok(None) | Err(_) => break,
                        Ok(Some(body)) => match decode_body(&body) {
                            Ok(Frame::EstimateRequest(req)) => match req.validate() {
                                Ok(()) => handler(&req),
                                Err(e) => Frame::Error { message: e.to_string() },
                            },
                            Ok(_) => Frame::Error {
                                message: "expected estimate_request".into(),
                            },
                            Err(e) => Frame::Error { message: e.to_string() },
                        },
                    };
                    if write_frame(&mut conn, &reply).is_err() {
                        break;
                    }
                }
            }
        });
        Ok(Self { addr, _handle: handle })
    }

    /// Answers with the observation plane as mean and unit uncertainty at
    /// unobserved points (zero where measured or inside buildings).
    pub fn spawn_echo() -> io::Result<Self> {
        Self::spawn(|req| {
            let uncertainty_map = req.mask.iter().map(|m| if *m == 0 { 1.0 } else { 0.0 }).collect();
            Frame::EstimateResponse(EstimateResponse {
                mean_map: req.y_matrix.clone(),
                uncertainty_map,
            })
        })
    }

    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_layout_is_length_prefixed_json() {
        let f = Frame::Error { message: "x".into() };
        let bytes = encode_frame(&f);
        let body = br#"{"type":"error","message":"x"}"#;
        assert_eq!(&bytes[..4], &(body.len() as u32).to_be_bytes());
        assert_eq!(&bytes[4..], body);
        assert_eq!(read_frame(&mut &bytes[..]).unwrap(), f);
    }

    #[test]
    fn observation_planes() {
        let g = GridGeometry::new(2, 3, 2.0, Point2::default())
            .unwrap()
            .with_buildings([5])
            .unwrap();
        let (y, m) = build_observation_planes(&[], &g);
        assert_eq!(y, vec![0.0; 6]);
        assert_eq!(m, vec![0, 0, 0, 0, 0, -1]);

        let samples = [
            (Point2::new(0.1, 0.0), 10.0),
            (Point2::new(0.0, 0.2), 20.0),
            (Point2::new(3.0, 0.0), 7.0),
        ];
        let (y, m) = build_observation_planes(&samples, &g);
        assert_eq!(y[0], 15.0);
        assert_eq!(m[0], 1);
        // halfway between columns 1 and 2 goes to the lower index
        assert_eq!(y[1], 7.0);
        assert_eq!(m[2], 0);

        let mut doubled = samples.to_vec();
        doubled.push(samples[0]);
        doubled.push(samples[1]);
        assert_eq!(build_observation_planes(&doubled, &g).0, y);
    }

    #[test]
    fn rejects_bad_masks_and_shapes() {
        let req = EstimateRequest {
            rows: 2,
            cols: 2,
            y_matrix: vec![0.0; 4],
            mask: vec![0, 2, 0, 0],
        };
        assert!(matches!(req.validate(), Err(BridgeError::MalformedFrame(_))));
        let req = EstimateRequest {
            mask: vec![0; 3],
            ..req
        };
        assert!(matches!(req.validate(), Err(BridgeError::ShapeMismatch { .. })));
    }
}

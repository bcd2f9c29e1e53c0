#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use greenbench_core::metrics::Label;

/// A request as the stub saw it.
#[derive(Debug, Clone)]
pub struct Captured {
    pub request_line: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

/// Minimal HTTP/1.1 server answering each connection with the next canned response.
pub struct StubServer {
    pub addr: SocketAddr,
    pub requests: Arc<Mutex<Vec<Captured>>>,
}

impl StubServer {
    /// `responses` are served in order; the last one repeats.
    pub fn start(responses: Vec<(u16, &'static str)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let Ok(stream) = stream else { continue };
                let (status, body) = responses[i.min(responses.len() - 1)];
                if let Some(captured) = serve(stream, status, body) {
                    seen.lock().unwrap().push(captured);
                }
            }
        });
        Self { addr, requests }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn captured(&self) -> Vec<Captured> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, status: u16, body: &str) -> Option<Captured> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let mut headers = Vec::new();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
            if k == "content-length" {
                content_length = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body_buf = vec![0u8; content_length];
    reader.read_exact(&mut body_buf).ok()?;

    let reason = if status == 200 { "OK" } else { "Error" };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let mut stream = stream;
    stream.write_all(response.as_bytes()).ok()?;
    stream.flush().ok()?;
    Some(Captured {
        request_line: request_line.trim_end().to_string(),
        headers,
        body: body_buf,
    })
}

/// An address with nothing listening on it.
pub fn dead_endpoint() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}

/// Straight-from-the-definitions metrics, written without the confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

pub fn brute_force_metrics(pairs: &[(Label, Label)]) -> OracleMetrics {
    let classes = [Label::Positive, Label::Negative, Label::Neutral];
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    let mut f1 = [0.0; 3];
    for (k, &c) in classes.iter().enumerate() {
        let tp = pairs.iter().filter(|(g, p)| *g == c && *p == c).count();
        let fp = pairs.iter().filter(|(g, p)| *g != c && *p == c).count();
        let fn_ = pairs.iter().filter(|(g, p)| *g == c && *p != c).count();
        precision[k] = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        recall[k] = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let (p, r) = (precision[k], recall[k]);
        f1[k] = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    let correct = pairs.iter().filter(|(g, p)| g == p).count();
    OracleMetrics {
        macro_precision: (precision[0] + precision[1] + precision[2]) / 3.0,
        macro_recall: (recall[0] + recall[1] + recall[2]) / 3.0,
        macro_f1: (f1[0] + f1[1] + f1[2]) / 3.0,
        accuracy: correct as f64 / pairs.len() as f64,
        precision,
        recall,
        f1,
    }
}

/// Distance in units in the last place between two finite f64 values of the same sign.
pub fn ulp_distance(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    key(a).abs_diff(key(b))
}

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use fflm::backend::http::WireResponse;
use fflm::backend::synthetic_score;
use fflm::cli::ScoreArgs;
use fflm::dataset::{self, EvalExample, Split};
use fflm::ScoreRequest;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn example(id: &str, split: Split, document: &str, summary: &str) -> EvalExample {
    EvalExample {
        id: id.into(),
        dataset: "fixture".into(),
        split,
        document: document.into(),
        summary: summary.into(),
        label: None,
        rating: None,
        system: None,
        error_types: None,
    }
}

pub fn write_dataset(path: &Path, examples: &[EvalExample]) {
    let mut out = Vec::new();
    dataset::write_jsonl(examples, &mut out).unwrap();
    std::fs::write(path, out).unwrap();
}

/// Detection pairs over disjoint vocabularies: consistent summaries copy
/// document tokens; corrupted ones swap `corrupt` of `summary_len` tokens
/// for words that never occur in any document.
pub fn separation_pairs(
    n_per_class: usize,
    doc_len: usize,
    summary_len: usize,
    corrupt: usize,
    seed: u64,
) -> Vec<(String, String, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let consistent = i % 2 == 0;
        let doc: Vec<String> = (0..doc_len)
            .map(|_| format!("w{:04}", rng.random_range(0..5000)))
            .collect();
        let mut summary: Vec<String> = (0..summary_len)
            .map(|_| doc.choose(&mut rng).unwrap().clone())
            .collect();
        if !consistent {
            let mut slots: Vec<usize> = (0..summary_len).collect();
            slots.shuffle(&mut rng);
            for &s in &slots[..corrupt] {
                summary[s] = format!("novel{:04}", rng.random_range(0..5000));
            }
        }
        pairs.push((doc.join(" "), summary.join(" "), consistent));
    }
    pairs
}

/// A detection dataset from [`separation_pairs`], first half `val`, second
/// half `test`.
pub fn detection_dataset(pairs: &[(String, String, bool)]) -> Vec<EvalExample> {
    let half = pairs.len() / 2;
    pairs
        .iter()
        .enumerate()
        .map(|(i, (doc, summary, consistent))| {
            let split = if i < half { Split::Val } else { Split::Test };
            let mut e = example(&format!("ex{i:04}"), split, doc, summary);
            e.label = Some(u8::from(*consistent));
            e
        })
        .collect()
}

pub fn score_args(
    input: &Path,
    backend: &str,
    replay: Option<PathBuf>,
    output: &Path,
) -> ScoreArgs {
    ScoreArgs {
        input: input.to_path_buf(),
        backend: backend.into(),
        replay,
        model_id: "default".into(),
        separator: "\\nTL;DR\\n".into(),
        joiner: "\\n".into(),
        context_budget: fflm::extraction::DEFAULT_CONTEXT_BUDGET,
        truncation: fflm::cli::TruncationArg::Tail,
        weights: "0.25,0.25,0.5".into(),
        ablate: Vec::new(),
        parallelism: 1,
        split: None,
        output: Some(output.to_path_buf()),
    }
}

#[derive(Debug, Deserialize)]
pub struct WireRequestOwned {
    pub model: String,
    pub conditioning: String,
    pub target: String,
}

/// What a stub server answers for one decoded request.
pub type Responder = dyn Fn(&WireRequestOwned) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server on an ephemeral port. One request per
/// connection; the server closes after answering.
pub struct StubServer {
    pub base_url: String,
    pub requests: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(responder: Arc<Responder>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&requests);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let responder = Arc::clone(&responder);
                let counter = Arc::clone(&counter);
                thread::spawn(move || {
                    if serve_one(stream, &*responder).is_ok() {
                        counter.fetch_add(1, Ordering::SeqCst);
                    }
                });
            }
        });
        Self { base_url, requests }
    }

    /// Answers with the synthetic backend's scores, echoing the model.
    pub fn synthetic(seed: u64) -> Self {
        Self::start(Arc::new(move |req: &WireRequestOwned| {
            let request = ScoreRequest {
                conditioning: req.conditioning.clone(),
                target: req.target.clone(),
                model_id: req.model.clone(),
            };
            let series = synthetic_score(&request, seed);
            let body = WireResponse {
                model: req.model.clone(),
                tokens: series.tokens().to_vec(),
                logprobs: series.logprobs().to_vec(),
            };
            (200, serde_json::to_string(&body).unwrap())
        }))
    }

    /// Always answers 200 with `body`.
    pub fn fixed(body: &str) -> Self {
        let body = body.to_owned();
        Self::start(Arc::new(move |_: &WireRequestOwned| (200, body.clone())))
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn serve_one(stream: TcpStream, responder: &Responder) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let (status, payload) = if !request_line.starts_with("POST /score ") {
        (404, "not found".to_owned())
    } else {
        match serde_json::from_slice::<WireRequestOwned>(&body) {
            Ok(req) => responder(&req),
            Err(e) => (400, e.to_string()),
        }
    };
    let reason = if status == 200 { "OK" } else { "Error" };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}

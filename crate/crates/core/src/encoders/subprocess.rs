//! Client side of the line-delimited JSON encoder protocol.
//!
//! ```text
//! child  -> {"type":"hello","dim":D}
//! parent -> {"type":"encode","id":N,"sentences":[["tok",...],...]}
//! child  -> {"type":"embeddings","id":N,"vectors":[[f,...],...]}
//! parent -> {"type":"shutdown"}
//! ```

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Encoder, Tokens};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
const STDERR_TAIL_LINES: usize = 20;

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Request<'a> {
    Encode { id: u64, sentences: &'a [Tokens] },
    Shutdown,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Reply {
    Hello { dim: usize },
    Embeddings { id: u64, vectors: Vec<Vec<f64>> },
}

pub struct SubprocessEncoder {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    stderr_thread: Option<JoinHandle<()>>,
    dim: usize,
    next_id: u64,
    timeout: Duration,
}

impl SubprocessEncoder {
    /// Runs `command` through `sh -c` and waits for the hello line.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        Self::spawn_command(cmd, timeout)
    }

    pub fn spawn_command(mut cmd: Command, timeout: Duration) -> Result<Self> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Encoder(format!("failed to spawn encoder {cmd:?}: {e}")))?;

        let stdout = child.stdout.take().expect("piped");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });

        let stderr = child.stderr.take().expect("piped");
        let stderr_tail = Arc::new(Mutex::new(VecDeque::new()));
        let tail = Arc::clone(&stderr_tail);
        let stderr_thread = std::thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(|l| l.ok()) {
                log::info!(target: "embeval::encoder", "{line}");
                let mut tail = tail.lock().expect("stderr tail lock");
                if tail.len() == STDERR_TAIL_LINES {
                    tail.pop_front();
                }
                tail.push_back(line);
            }
        });

        let mut encoder = SubprocessEncoder {
            stdin: child.stdin.take(),
            child,
            lines,
            stderr_tail,
            stderr_thread: Some(stderr_thread),
            dim: 0,
            next_id: 0,
            timeout,
        };
        match encoder.read_reply()? {
            Reply::Hello { dim } if dim > 0 => encoder.dim = dim,
            Reply::Hello { .. } => return Err(Error::Protocol("hello announced dim 0".into())),
            Reply::Embeddings { .. } => {
                return Err(Error::Protocol(
                    "expected hello as the first message".into(),
                ))
            }
        }
        Ok(encoder)
    }

    pub fn requests_sent(&self) -> u64 {
        self.next_id
    }

    fn child_exit_error(&mut self) -> Error {
        // give the process a moment to finish exiting after closing stdout
        let deadline = Instant::now() + Duration::from_secs(5);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(status)) => break status.to_string(),
                Ok(None) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(10))
                }
                Ok(None) => {
                    let _ = self.child.kill();
                    break "closed its output but kept running; killed".to_string();
                }
                Err(e) => break format!("unknown status ({e})"),
            }
        };
        if let Some(handle) = self.stderr_thread.take() {
            let _ = handle.join();
        }
        let stderr = self
            .stderr_tail
            .lock()
            .map(|t| t.iter().cloned().collect::<Vec<_>>().join("\n"))
            .unwrap_or_default();
        Error::ChildExit { status, stderr }
    }

    fn read_reply(&mut self) -> Result<Reply> {
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Protocol(format!("reading encoder output: {e}"))),
            Err(RecvTimeoutError::Disconnected) => return Err(self.child_exit_error()),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                return Err(Error::Timeout(self.timeout));
            }
        };
        serde_json::from_str(&line).map_err(|e| {
            let shown: String = line.chars().take(200).collect();
            Error::Protocol(format!("malformed message {shown:?}: {e}"))
        })
    }

    fn send(&mut self, request: &Request) -> Result<()> {
        let mut payload = serde_json::to_vec(request).expect("requests always serialize");
        payload.push(b'\n');
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Protocol("encoder already shut down".into()))?;
        if stdin
            .write_all(&payload)
            .and_then(|_| stdin.flush())
            .is_err()
        {
            return Err(self.child_exit_error());
        }
        Ok(())
    }

    /// Sends the shutdown message and waits for the child to exit.
    pub fn shutdown(mut self) -> Result<ExitStatus> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> Result<ExitStatus> {
        if self.stdin.is_some() {
            let _ = self.send(&Request::Shutdown);
            self.stdin = None;
        }
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            if let Some(status) = self
                .child
                .try_wait()
                .map_err(|e| Error::Encoder(e.to_string()))?
            {
                if let Some(handle) = self.stderr_thread.take() {
                    let _ = handle.join();
                }
                return Ok(status);
            }
            if Instant::now() >= deadline {
                let _ = self.child.kill();
                return self.child.wait().map_err(|e| Error::Encoder(e.to_string()));
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    }
}

impl Encoder for SubprocessEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_batch(&mut self, batch: &[Tokens]) -> Result<Matrix> {
        let id = self.next_id;
        self.next_id += 1;
        self.send(&Request::Encode {
            id,
            sentences: batch,
        })?;
        let (reply_id, vectors) = match self.read_reply()? {
            Reply::Embeddings { id, vectors } => (id, vectors),
            Reply::Hello { .. } => return Err(Error::Protocol("unexpected second hello".into())),
        };
        if reply_id != id {
            return Err(Error::Protocol(format!(
                "reply id {reply_id} does not match request id {id}"
            )));
        }
        if vectors.len() != batch.len() {
            return Err(Error::Protocol(format!(
                "request {id}: sent {} sentences, received {} vectors",
                batch.len(),
                vectors.len()
            )));
        }
        if let Some((i, v)) = vectors
            .iter()
            .enumerate()
            .find(|(_, v)| v.len() != self.dim)
        {
            return Err(Error::ShapeMismatch {
                op: "subprocess encoder reply",
                expected: format!("dim {} (from hello)", self.dim),
                got: format!("dim {} in row {i}", v.len()),
            });
        }
        Matrix::from_rows(&vectors)
    }
}

impl Drop for SubprocessEncoder {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.shutdown_inner();
        }
    }
}

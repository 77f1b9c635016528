//! External policies over a JSON wire protocol.
//!
//! Request: `{"version":1,"packet":{...}}`. A corrective retry adds
//! `"retry":{"error":"..."}` with the validation error of the first reply.
//! Response: the policy output fields, optionally with `"version":1`.
//! Transports are line-delimited stdio and HTTP POST to `/evaluate`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Duration;

use eog_core::policy::{AbductivePolicy, PolicyError, PolicyOutput};
use eog_core::{ContextPacket, EntityId};
use serde_json::{json, Value};

pub const WIRE_VERSION: u64 = 1;

/// Sends one request and returns the raw response text.
pub trait Transport {
    fn exchange(&mut self, request: &str) -> Result<String, PolicyError>;
}

/// A child process speaking one JSON object per line on stdin/stdout.
pub struct StdioTransport {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl StdioTransport {
    pub fn spawn(program: &str, args: &[String]) -> std::io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            child,
            stdin,
            stdout,
        })
    }
}

impl Transport for StdioTransport {
    fn exchange(&mut self, request: &str) -> Result<String, PolicyError> {
        let io = |e: std::io::Error| PolicyError::Transport(format!("stdio: {e}"));
        self.stdin.write_all(request.as_bytes()).map_err(io)?;
        self.stdin.write_all(b"\n").map_err(io)?;
        self.stdin.flush().map_err(io)?;
        let mut line = String::new();
        if self.stdout.read_line(&mut line).map_err(io)? == 0 {
            return Err(PolicyError::Transport("stdio: policy process closed its output".into()));
        }
        Ok(line)
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// HTTP POST of each request to `<endpoint>/evaluate`.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/evaluate") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/evaluate")
        };
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        Self {
            agent: config.into(),
            url,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Transport for HttpTransport {
    fn exchange(&mut self, request: &str) -> Result<String, PolicyError> {
        let err = |e: ureq::Error| PolicyError::Transport(format!("http: {e}"));
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(request)
            .map_err(err)?;
        resp.body_mut().read_to_string().map_err(err)
    }
}

/// Parses and validates a response for an evaluation of `entity`.
pub fn parse_response(text: &str, entity: &EntityId) -> Result<PolicyOutput, String> {
    let mut value: Value = serde_json::from_str(text.trim()).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| "response is not a JSON object".to_string())?;
    if let Some(v) = obj.remove("version") {
        if v.as_u64() != Some(WIRE_VERSION) {
            return Err(format!("unsupported version {v}"));
        }
    }
    let out: PolicyOutput = serde_json::from_value(value).map_err(|e| format!("schema: {e}"))?;
    out.validate(entity).map_err(|e| e.to_string())?;
    Ok(out)
}

/// A policy answered by an external process or service.
pub struct ExternalPolicy<T> {
    transport: T,
    name: String,
    retries: u64,
}

impl<T: Transport> ExternalPolicy<T> {
    pub fn new(transport: T, name: impl Into<String>) -> Self {
        Self {
            transport,
            name: name.into(),
            retries: 0,
        }
    }

    /// Corrective retries sent so far.
    pub fn retries(&self) -> u64 {
        self.retries
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

impl<T: Transport> AbductivePolicy for ExternalPolicy<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&mut self, packet: &ContextPacket) -> Result<PolicyOutput, PolicyError> {
        let request = json!({"version": WIRE_VERSION, "packet": packet}).to_string();
        let first = self.transport.exchange(&request)?;
        let error = match parse_response(&first, &packet.entity) {
            Ok(out) => return Ok(out),
            Err(e) => e,
        };
        self.retries += 1;
        let retry = json!({
            "version": WIRE_VERSION,
            "packet": packet,
            "retry": {"error": error},
        })
        .to_string();
        let second = self.transport.exchange(&retry)?;
        parse_response(&second, &packet.entity)
            .map_err(|e| PolicyError::SchemaViolation(format!("invalid after retry: {e}")))
    }
}

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{excerpt, extract_sql, ClientError, GenerationRequest, GenerationResponse, ModelClient, Usage};

/// One line of a mock script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    /// Prompt substring this entry answers; `None` answers any prompt.
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    pub responses: Vec<String>,
}

#[derive(Debug, Default)]
struct MockState {
    queues: Vec<(Option<String>, VecDeque<String>)>,
    prompts: Vec<String>,
}

/// Scripted client. Responses are consumed front to back from the entries
/// whose pattern occurs in the prompt, in script order. A request for more
/// responses than remain fails with [`ClientError::MockExhausted`] and
/// consumes nothing.
#[derive(Debug)]
pub struct MockClient {
    name: String,
    state: Mutex<MockState>,
}

impl MockClient {
    pub fn new(entries: Vec<MockEntry>) -> Self {
        let queues = entries.into_iter().map(|e| (e.pattern, e.responses.into())).collect();
        MockClient { name: "mock".into(), state: Mutex::new(MockState { queues, prompts: Vec::new() }) }
    }

    /// A mock that answers any prompt from one queue.
    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(vec![MockEntry { pattern: None, responses: responses.into_iter().map(Into::into).collect() }])
    }

    pub fn from_path(path: &Path) -> Result<Self, ClientError> {
        let io = |e: std::io::Error| ClientError::Io { path: path.into(), message: e.to_string() };
        let file = File::open(path).map_err(io)?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: MockEntry = serde_json::from_str(&line).map_err(|e| ClientError::Script {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        let mut client = Self::new(entries);
        client.name = format!("mock:{}", path.display());
        Ok(client)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.lock().prompts.clone()
    }

    pub fn calls(&self) -> usize {
        self.lock().prompts.len()
    }

    pub fn remaining(&self) -> usize {
        self.lock().queues.iter().map(|(_, q)| q.len()).sum()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, MockState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl ModelClient for MockClient {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError> {
        request.check()?;
        let mut state = self.lock();
        state.prompts.push(request.prompt.clone());
        let matching = |pattern: &Option<String>| pattern.as_deref().is_none_or(|p| request.prompt.contains(p));
        let available: usize = state.queues.iter().filter(|(p, _)| matching(p)).map(|(_, q)| q.len()).sum();
        if available < request.n {
            return Err(ClientError::MockExhausted { prompt_excerpt: excerpt(&request.prompt) });
        }
        let mut raw = Vec::with_capacity(request.n);
        for (pattern, queue) in state.queues.iter_mut() {
            if !matching(pattern) {
                continue;
            }
            while raw.len() < request.n {
                match queue.pop_front() {
                    Some(r) => raw.push(r),
                    None => break,
                }
            }
        }
        tracing::debug!(client = %self.name, n = request.n, "mock generation");
        Ok(GenerationResponse {
            completions: raw.iter().map(|r| extract_sql(r)).collect(),
            raw,
            model_name: self.name.clone(),
            usage: Usage::default(),
        })
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Wraps a client and records every exchange as a replayable mock script
/// keyed on the full prompt.
pub struct RecordingClient<C> {
    inner: C,
    log: Mutex<Vec<MockEntry>>,
}

impl<C: ModelClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        RecordingClient { inner, log: Mutex::new(Vec::new()) }
    }

    pub fn entries(&self) -> Vec<MockEntry> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn write_script(&self, path: &Path) -> Result<(), ClientError> {
        let io = |e: std::io::Error| ClientError::Io { path: PathBuf::from(path), message: e.to_string() };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        for entry in self.entries() {
            let line = serde_json::to_string(&entry).expect("mock entries serialize");
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

impl<C: ModelClient> ModelClient for RecordingClient<C> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError> {
        let response = self.inner.generate(request)?;
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(MockEntry {
            pattern: Some(request.prompt.clone()),
            responses: response.raw.clone(),
        });
        Ok(response)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str, n: usize) -> GenerationRequest {
        GenerationRequest::new(prompt).with_n(n)
    }

    #[test]
    fn scripted_echo() {
        let m = MockClient::from_responses(["SELECT 1"]);
        assert_eq!(m.generate(&req("p", 1)).unwrap().completions, ["SELECT 1"]);
        assert!(matches!(m.generate(&req("p", 1)), Err(ClientError::MockExhausted { .. })));
    }

    #[test]
    fn n_responses_in_script_order() {
        let m = MockClient::from_responses(["a", "b", "c", "d"]);
        assert_eq!(m.generate(&req("p", 4)).unwrap().completions, ["a", "b", "c", "d"]);
    }

    #[test]
    fn match_routes_by_substring() {
        let m = MockClient::new(vec![
            MockEntry { pattern: Some("ppos".into()), responses: vec!["```sql\nSELECT ppos FROM tryout\n```".into()] },
            MockEntry { pattern: None, responses: vec!["SELECT 0".into()] },
        ]);
        let r = m.generate(&req("which ppos?", 1)).unwrap();
        assert_eq!(r.completions, ["SELECT ppos FROM tryout"]);
        assert!(r.raw[0].starts_with("```"));
        assert_eq!(m.generate(&req("other", 1)).unwrap().completions, ["SELECT 0"]);
        let err = m.generate(&req("which ppos?", 1)).unwrap_err();
        assert!(matches!(err, ClientError::MockExhausted { .. }));
        assert_eq!(m.calls(), 3);
    }

    #[test]
    fn exhaustion_consumes_nothing() {
        let m = MockClient::from_responses(["a", "b"]);
        assert!(m.generate(&req("p", 3)).is_err());
        assert_eq!(m.remaining(), 2);
    }

    #[test]
    fn recording_replays_identically() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("rec.jsonl");
        let rec = RecordingClient::new(MockClient::from_responses(["SELECT 1;", "```\nSELECT 2\n```", "SELECT 3"]));
        let first = rec.generate(&req("alpha", 2)).unwrap();
        let second = rec.generate(&req("beta", 1)).unwrap();
        rec.write_script(&script).unwrap();

        let replay = MockClient::from_path(&script).unwrap();
        assert_eq!(replay.generate(&req("alpha", 2)).unwrap().completions, first.completions);
        assert_eq!(replay.generate(&req("beta", 1)).unwrap().completions, second.completions);
    }

    #[test]
    fn script_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"responses\": [\"x\"]}\n{\"match\": 3}\n").unwrap();
        match MockClient::from_path(&path) {
            Err(ClientError::Script { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::Agent;

use super::protocol::{
    FillMaskRequest, FillMaskResponse, HealthResponse, ParseRequest, ParseResponse, FILL_MASK_PATH, HEALTH_PATH,
    PARSE_PATH,
};
use super::{MaskQuery, OracleError, ParserOracle, Proposal, TokenProposer};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub max_in_flight: usize,
    /// Extra attempts after a transport failure or 5xx answer.
    pub retries: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: "http://127.0.0.1:8080".into(),
            timeout: Duration::from_secs(30),
            max_in_flight: 8,
            retries: 2,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Clone, Copy)]
enum Service {
    Proposer,
    Parser,
}

impl Service {
    fn unavailable(self, msg: String) -> OracleError {
        match self {
            Service::Proposer => OracleError::ProposerUnavailable(msg),
            Service::Parser => OracleError::OracleUnavailable(msg),
        }
    }
}

/// Blocking HTTP client for the model bridge; implements both interfaces.
#[derive(Debug)]
pub struct RemoteClient {
    config: RemoteConfig,
    agent: Agent,
    gate: Gate,
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(config.max_in_flight);
        RemoteClient { config, agent, gate }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn request<B: Serialize, R: DeserializeOwned>(
        &self,
        service: Service,
        path: &str,
        body: Option<&B>,
    ) -> Result<R, OracleError> {
        let url = self.url(path);
        let _permit = self.gate.acquire();
        let mut last_err = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                log::debug!("retrying {url} (attempt {})", attempt + 1);
            }
            let sent = match body {
                Some(b) => self.agent.post(&url).send_json(b),
                None => self.agent.get(&url).call(),
            };
            let mut resp = match sent {
                Ok(r) => r,
                Err(e) => {
                    last_err = format!("{url}: {e}");
                    continue;
                }
            };
            let status = resp.status().as_u16();
            match status {
                200..=299 => {
                    return resp
                        .body_mut()
                        .read_json::<R>()
                        .map_err(|e| OracleError::Protocol(format!("{url}: bad response body: {e}")));
                }
                400 | 422 => {
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    return Err(OracleError::Protocol(format!("{url}: HTTP {status}: {text}")));
                }
                503 => return Err(service.unavailable(format!("{url}: model not loaded (HTTP 503)"))),
                _ => last_err = format!("{url}: HTTP {status}"),
            }
        }
        Err(service.unavailable(last_err))
    }

    pub fn health(&self) -> Result<HealthResponse, OracleError> {
        self.request::<(), _>(Service::Proposer, HEALTH_PATH, None)
    }

    pub fn fill_mask(&self, request: &FillMaskRequest) -> Result<FillMaskResponse, OracleError> {
        self.request(Service::Proposer, FILL_MASK_PATH, Some(request))
    }
}

impl TokenProposer for RemoteClient {
    fn propose(&self, query: &MaskQuery, top_k: usize) -> Result<Vec<Vec<Proposal>>, OracleError> {
        if query.mask_positions().is_empty() {
            return Ok(Vec::new());
        }
        self.fill_mask(&FillMaskRequest::new(query, top_k))?
            .into_ranked(query, top_k)
    }
}

impl ParserOracle for RemoteClient {
    fn parse(&self, utterance: &str) -> Result<Option<String>, OracleError> {
        let req = ParseRequest {
            utterance: crate::top::canonicalize(utterance),
        };
        let resp: ParseResponse = self.request(Service::Parser, PARSE_PATH, Some(&req))?;
        Ok(resp.canonical())
    }
}

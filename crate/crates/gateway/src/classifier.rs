//! Blocking HTTP transport for the external classifier. Calls run on the
//! pipeline's blocking thread, never on the async executor.

use std::sync::OnceLock;
use std::time::Duration;

use fsa_core::scoring::{ClassifierError, ClassifierRequest, ClassifierTransport};

pub struct HttpTransport {
    endpoint: String,
    client: OnceLock<reqwest::blocking::Client>,
}

impl HttpTransport {
    /// `base` is the classifier root; requests go to `{base}/score`.
    pub fn new(base: &str) -> Self {
        Self { endpoint: format!("{}/score", base.trim_end_matches('/')), client: OnceLock::new() }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ClassifierTransport for HttpTransport {
    fn post(&self, request: &ClassifierRequest, timeout: Duration) -> Result<Vec<u8>, ClassifierError> {
        let client = self.client.get_or_init(reqwest::blocking::Client::new);
        let body = serde_json::to_vec(request).map_err(|e| ClassifierError::Transport(e.to_string()))?;
        let response = client
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .timeout(timeout)
            .body(body)
            .send()
            .map_err(|e| if e.is_timeout() { ClassifierError::Timeout } else { ClassifierError::Transport(e.to_string()) })?;
        let status = response.status();
        if status != reqwest::StatusCode::OK {
            return Err(ClassifierError::Status(status.as_u16()));
        }
        response
            .bytes()
            .map(|b| b.to_vec())
            .map_err(|e| if e.is_timeout() { ClassifierError::Timeout } else { ClassifierError::Transport(e.to_string()) })
    }
}

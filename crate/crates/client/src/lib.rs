//! Thin async client of the mgdial service.

use mgdial_core::eval::{Curve, EvalReport, LodoTable};
use mgdial_core::model::{ApiCall, ApiResult, InstructionId};
use mgdial_protocol::ops::{
    Annotate, Annotated, CheckParaphrases, Evaluate, GenCorpus, GenDb, GenGoals, GeneratedCorpus,
    GeneratedDb, GeneratedGoals, LeaveOneDomainOut, ParaphraseCheck, SweepData, SweepManuals,
};
use mgdial_protocol::session::{
    CallAccepted, ChecklistState, ChecklistUpdate, CollectedCorpus, CreateSession, EventLog,
    Finalized, GoalList, ManualList, MessageAccepted, PostMessage, SearchResults,
    SelectInstructions, SelectionAccepted, SessionCreated, SessionExport, SessionList, SessionView,
    SubmitCall,
};
use mgdial_protocol::{ErrorBody, ErrorKind, Health, Versioned, API_VERSION};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{status} {kind:?}: {message}")]
    Api {
        status: u16,
        kind: ErrorKind,
        message: String,
    },
    #[error("cannot decode response ({status}): {message}")]
    Decode { status: u16, message: String },
    #[error("server speaks api version {0}, client speaks {API_VERSION}")]
    Version(u32),
}

impl ClientError {
    /// Error class reported by the service, if any.
    pub fn kind(&self) -> Option<ErrorKind> {
        match self {
            ClientError::Api { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// Session id and the capability token of one role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub session: String,
    pub token: String,
}

/// The two role credentials of a fresh session.
pub fn credentials(created: &SessionCreated) -> (Credentials, Credentials) {
    let c = |token: &str| Credentials {
        session: created.session.clone(),
        token: token.to_string(),
    };
    (c(&created.user_token), c(&created.agent_token))
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// Client of the service at `base`, such as `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(response: reqwest::Response) -> Result<T> {
        let status = response.status().as_u16();
        let bytes = response.bytes().await?;
        Self::decode_slice(status, &bytes)
    }

    fn decode_slice<T: DeserializeOwned>(status: u16, bytes: &[u8]) -> Result<T> {
        if !(200..300).contains(&status) {
            return Err(
                match serde_json::from_slice::<Versioned<ErrorBody>>(bytes) {
                    Ok(v) => ClientError::Api {
                        status,
                        kind: v.body.error,
                        message: v.body.message,
                    },
                    Err(_) => ClientError::Decode {
                        status,
                        message: String::from_utf8_lossy(bytes).into_owned(),
                    },
                },
            );
        }
        let v: Versioned<T> = serde_json::from_slice(bytes).map_err(|e| ClientError::Decode {
            status,
            message: e.to_string(),
        })?;
        if v.version != API_VERSION {
            return Err(ClientError::Version(v.version));
        }
        Ok(v.body)
    }

    async fn get<T: DeserializeOwned>(&self, path: &str, token: Option<&str>) -> Result<T> {
        let mut req = self.http.get(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        Self::decode(req.send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(
        &self,
        path: &str,
        token: Option<&str>,
        body: &B,
    ) -> Result<T> {
        let mut req = self
            .http
            .post(format!("{}{path}", self.base))
            .json(&Versioned::new(body));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        Self::decode(req.send().await?).await
    }

    fn session_path(c: &Credentials, tail: &str) -> String {
        format!("/v1/sessions/{}{tail}", c.session)
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/v1/health", None).await
    }

    pub async fn goals(&self) -> Result<GoalList> {
        self.get("/v1/goals", None).await
    }

    pub async fn manuals(&self) -> Result<ManualList> {
        self.get("/v1/manuals", None).await
    }

    pub async fn sessions(&self) -> Result<SessionList> {
        self.get("/v1/sessions", None).await
    }

    pub async fn corpus(&self) -> Result<CollectedCorpus> {
        self.get("/v1/corpus", None).await
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<SessionCreated> {
        self.post("/v1/sessions", None, req).await
    }

    pub async fn view(&self, c: &Credentials) -> Result<SessionView> {
        self.get(&Self::session_path(c, ""), Some(&c.token)).await
    }

    pub async fn send_message(&self, c: &Credentials, text: &str) -> Result<MessageAccepted> {
        self.post(
            &Self::session_path(c, "/messages"),
            Some(&c.token),
            &PostMessage {
                text: text.to_string(),
            },
        )
        .await
    }

    pub async fn search_manual(
        &self,
        c: &Credentials,
        query: &str,
        k: usize,
    ) -> Result<SearchResults> {
        let mut url = reqwest::Url::parse(&format!(
            "{}{}",
            self.base,
            Self::session_path(c, "/manual/search")
        ))
        .map_err(|e| ClientError::Decode {
            status: 0,
            message: e.to_string(),
        })?;
        url.query_pairs_mut()
            .append_pair("q", query)
            .append_pair("k", &k.to_string());
        Self::decode(self.http.get(url).bearer_auth(&c.token).send().await?).await
    }

    pub async fn select_instructions(
        &self,
        c: &Credentials,
        ids: &[InstructionId],
    ) -> Result<SelectionAccepted> {
        let body = SelectInstructions {
            instructions: ids.to_vec(),
        };
        self.post(
            &Self::session_path(c, "/instructions"),
            Some(&c.token),
            &body,
        )
        .await
    }

    pub async fn call_api(&self, c: &Credentials, call: &ApiCall) -> Result<ApiResult> {
        let body = SubmitCall { call: call.clone() };
        let accepted: CallAccepted = self
            .post(&Self::session_path(c, "/api"), Some(&c.token), &body)
            .await?;
        Ok(accepted.result)
    }

    pub async fn checklist(&self, c: &Credentials) -> Result<ChecklistState> {
        self.get(&Self::session_path(c, "/checklist"), Some(&c.token))
            .await
    }

    pub async fn update_checklist(
        &self,
        c: &Credentials,
        update: &ChecklistUpdate,
    ) -> Result<ChecklistState> {
        self.post(&Self::session_path(c, "/checklist"), Some(&c.token), update)
            .await
    }

    pub async fn finalize(&self, c: &Credentials) -> Result<Finalized> {
        self.post(
            &Self::session_path(c, "/finalize"),
            Some(&c.token),
            &serde_json::json!({}),
        )
        .await
    }

    pub async fn reopen(&self, c: &Credentials) -> Result<MessageAccepted> {
        self.post(
            &Self::session_path(c, "/reopen"),
            Some(&c.token),
            &serde_json::json!({}),
        )
        .await
    }

    pub async fn export(&self, c: &Credentials) -> Result<SessionExport> {
        self.get(&Self::session_path(c, "/export"), Some(&c.token))
            .await
    }

    /// Export document exactly as served.
    pub async fn export_bytes(&self, c: &Credentials) -> Result<Vec<u8>> {
        let url = format!("{}{}", self.base, Self::session_path(c, "/export"));
        let response = self.http.get(url).bearer_auth(&c.token).send().await?;
        let status = response.status().as_u16();
        let bytes = response.bytes().await?.to_vec();
        Self::decode_slice::<SessionExport>(status, &bytes)?;
        Ok(bytes)
    }

    pub async fn events(&self, c: &Credentials) -> Result<EventLog> {
        self.get(&Self::session_path(c, "/events"), Some(&c.token))
            .await
    }

    pub async fn gen_db(&self, req: &GenDb) -> Result<GeneratedDb> {
        self.post("/v1/ops/gen-db", None, req).await
    }

    pub async fn gen_goals(&self, req: &GenGoals) -> Result<GeneratedGoals> {
        self.post("/v1/ops/gen-goals", None, req).await
    }

    pub async fn gen_corpus(&self, req: &GenCorpus) -> Result<GeneratedCorpus> {
        self.post("/v1/ops/gen-corpus", None, req).await
    }

    pub async fn check_paraphrases(&self, req: &CheckParaphrases) -> Result<ParaphraseCheck> {
        self.post("/v1/ops/check-paraphrases", None, req).await
    }

    pub async fn eval(&self, req: &Evaluate) -> Result<EvalReport> {
        self.post("/v1/ops/eval", None, req).await
    }

    pub async fn sweep_data(&self, req: &SweepData) -> Result<Curve> {
        self.post("/v1/ops/sweep-data", None, req).await
    }

    pub async fn sweep_manuals(&self, req: &SweepManuals) -> Result<Curve> {
        self.post("/v1/ops/sweep-manuals", None, req).await
    }

    pub async fn lodo(&self, req: &LeaveOneDomainOut) -> Result<LodoTable> {
        self.post("/v1/ops/lodo", None, req).await
    }

    pub async fn annotate(&self, req: &Annotate) -> Result<Annotated> {
        self.post("/v1/ops/annotate", None, req).await
    }
}

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};

use screenwise_core::info::single_test_info;
use screenwise_core::preference::{
    generate_questions, Choice, ElicitationOutcome, ElicitationSession, PairOption, PairQuestion,
};

use crate::error::ApiError;
use crate::AppState;

/// Prior at which generated questions quote each option's information.
pub const QUESTION_PRIOR: f64 = 0.00085;
/// Information of the unpriced option offered at a level with one test.
pub const SYNTHETIC_INFO: f64 = 0.4;

#[derive(Default)]
pub struct SessionStore {
    next: AtomicU64,
    sessions: Mutex<HashMap<String, Arc<Mutex<ElicitationSession>>>>,
}

impl SessionStore {
    fn insert(&self, session: ElicitationSession) -> String {
        let id = format!("s{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
        self.sessions
            .lock()
            .unwrap()
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<ElicitationSession>>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    /// Explicit questions, asked in order. Generated from the catalog when absent.
    pub questions: Option<Vec<PairQuestion>>,
    /// Restrict generated questions to one comfort level.
    pub comfort_level: Option<u8>,
    pub p_crc: Option<f64>,
    pub lambda4: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct NextQuestion {
    pub index: usize,
    pub question: PairQuestion,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SessionCreated {
    pub id: String,
    pub questions: usize,
    pub next: Option<NextQuestion>,
}

fn next_of(s: &ElicitationSession) -> Option<NextQuestion> {
    s.next_index().map(|index| NextQuestion {
        index,
        question: s.questions[index].clone(),
    })
}

pub async fn create(
    State(s): State<Arc<AppState>>,
    body: Option<Json<CreateSession>>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let req = body.map(|b| b.0).unwrap_or_default();
    let questions = match req.questions {
        Some(q) => q,
        None => {
            let p = req.p_crc.unwrap_or(QUESTION_PRIOR);
            let mut options = Vec::new();
            for spec in std::iter::once(s.catalog.colonoscopy()).chain(s.catalog.tests()) {
                let level = spec.comfort.level();
                if level > 3 {
                    continue;
                }
                let info = single_test_info(p, spec)?;
                options.push((
                    level,
                    PairOption {
                        label: spec.id.to_string(),
                        info: (info * 1000.0).round() / 1000.0,
                        cost: Some(spec.unit_cost),
                    },
                ));
            }
            options.sort_by_key(|o| o.0);
            generate_questions(&options, SYNTHETIC_INFO)
        }
    };
    let questions: Vec<PairQuestion> = match req.comfort_level {
        Some(k) => questions.into_iter().filter(|q| q.comfort == k).collect(),
        None => questions,
    };
    if questions.is_empty() {
        return Err(ApiError::bad_request("session has no questions"));
    }
    if let Some(q) = questions.iter().find(|q| !(1..=3).contains(&q.comfort)) {
        return Err(ApiError::bad_request(format!(
            "comfort level {} cannot be elicited",
            q.comfort
        )));
    }
    let mut session = ElicitationSession::new(questions);
    if let Some(l) = req.lambda4 {
        session.lambda4 = l;
    }
    let created = SessionCreated {
        id: String::new(),
        questions: session.questions.len(),
        next: next_of(&session),
    };
    let id = s.sessions.insert(session);
    Ok((StatusCode::CREATED, Json(SessionCreated { id, ..created })))
}

/// A pairwise answer (`index`, `preferred`, `indifferenceCost`) or a PE
/// answer (`pe`).
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnswerRequest {
    pub index: Option<usize>,
    pub preferred: Option<Choice>,
    pub indifference_cost: Option<f64>,
    pub pe: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct AnswerResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub next: Option<NextQuestion>,
    pub complete: bool,
}

pub async fn answer(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<AnswerRequest>,
) -> Result<Json<AnswerResponse>, ApiError> {
    let session = s.sessions.get(&id)?;
    let mut session = session.lock().unwrap();
    let lambda = match (req.index, req.preferred, req.indifference_cost, req.pe) {
        (Some(index), Some(preferred), Some(cost), None) => {
            session.check_order(index).map_err(|_| match session.next_index() {
                Some(i) => ApiError::conflict(format!("expected an answer to question {i}, got {index}")),
                None => ApiError::conflict("all questions are already answered"),
            })?;
            Some(session.answer(index, preferred, cost)?)
        }
        (None, None, None, Some(pe)) => {
            session.answer_pe(pe)?;
            None
        }
        _ => {
            return Err(ApiError::bad_request(
                "answer with either `index`, `preferred` and `indifferenceCost`, or `pe`",
            ))
        }
    };
    Ok(Json(AnswerResponse {
        lambda,
        next: next_of(&session),
        complete: session.is_complete(),
    }))
}

pub async fn result(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<ElicitationOutcome>, ApiError> {
    let session = s.sessions.get(&id)?;
    let session = session.lock().unwrap();
    if let Some(i) = session.next_index() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "incomplete",
            format!("session `{id}` is waiting for an answer to question {i}"),
        ));
    }
    Ok(Json(session.result(&s.params)?))
}

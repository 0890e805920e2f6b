use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::lexical::lexical_alignment_score;
use super::linearize::LinearizedUnit;
use crate::error::{Error, Result};
use crate::segment::Lexicon;

/// Label (1 = faithful, 0 = hallucinated) and score of one answer fragment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FragmentScore {
    pub label: u8,
    pub score: f64,
}

pub trait FragmentScorer: Send + Sync {
    fn score(&self, unit: &LinearizedUnit) -> Result<FragmentScore>;

    /// Scores in the order of `units`.
    fn score_batch(&self, units: &[LinearizedUnit]) -> Result<Vec<FragmentScore>> {
        units.iter().map(|u| self.score(u)).collect()
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Term-coverage scorer: label 1 iff the coverage score reaches the threshold.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    pub lexicon: Lexicon,
    pub threshold: f64,
}

impl LexicalScorer {
    pub fn new(lexicon: Lexicon, threshold: f64) -> Self {
        LexicalScorer { lexicon, threshold }
    }
}

impl FragmentScorer for LexicalScorer {
    fn score(&self, unit: &LinearizedUnit) -> Result<FragmentScore> {
        let score = lexical_alignment_score(&unit.premise, &unit.hypothesis, &self.lexicon);
        Ok(FragmentScore {
            label: u8::from(score >= self.threshold),
            score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRequest {
    pub items: Vec<ScoreRequest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchResponse {
    pub results: Vec<FragmentScore>,
}

/// Client for a scoring service speaking JSON over HTTP:
/// `POST /score` with `{"premise", "hypothesis"}` returning `{"label", "score"}`,
/// and `POST /score_batch` with `{"items": [...]}` returning `{"results": [...]}`.
pub struct RemoteScorer {
    base: String,
    agent: ureq::Agent,
}

impl RemoteScorer {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        RemoteScorer {
            base: endpoint.trim_end_matches('/').to_string(),
            agent: config.into(),
        }
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
        unit: usize,
    ) -> Result<Resp> {
        let url = format!("{}{path}", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Error::ScorerUnreachable {
                unit,
                reason: e.to_string(),
            })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(Error::MalformedReply {
                unit,
                reason: format!("HTTP status {status}"),
            });
        }
        resp.body_mut()
            .read_json::<Resp>()
            .map_err(|e| Error::MalformedReply {
                unit,
                reason: e.to_string(),
            })
    }
}

fn check_reply(s: FragmentScore, unit: usize) -> Result<FragmentScore> {
    if s.label > 1 || !(0.0..=1.0).contains(&s.score) {
        return Err(Error::MalformedReply {
            unit,
            reason: format!("label {} / score {} out of range", s.label, s.score),
        });
    }
    Ok(s)
}

fn request(unit: &LinearizedUnit) -> ScoreRequest {
    ScoreRequest {
        premise: unit.premise.clone(),
        hypothesis: unit.hypothesis.clone(),
    }
}

impl FragmentScorer for RemoteScorer {
    fn score(&self, unit: &LinearizedUnit) -> Result<FragmentScore> {
        let reply = self.post::<_, FragmentScore>("/score", &request(unit), unit.node)?;
        check_reply(reply, unit.node)
    }

    fn score_batch(&self, units: &[LinearizedUnit]) -> Result<Vec<FragmentScore>> {
        let Some(first) = units.first() else {
            return Ok(Vec::new());
        };
        let body = BatchRequest {
            items: units.iter().map(request).collect(),
        };
        let reply: BatchResponse = self.post("/score_batch", &body, first.node)?;
        if reply.results.len() != units.len() {
            return Err(Error::MalformedReply {
                unit: first.node,
                reason: format!("{} results for {} items", reply.results.len(), units.len()),
            });
        }
        reply
            .results
            .into_iter()
            .zip(units)
            .map(|(s, u)| check_reply(s, u.node))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Lexical,
    Remote,
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexical" => Ok(ScorerKind::Lexical),
            "remote" => Ok(ScorerKind::Remote),
            other => Err(Error::InvalidArgument(format!("unknown scorer {other:?}"))),
        }
    }
}

/// Scorer selection as configured for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerBinding {
    pub kind: ScorerKind,
    pub threshold: f64,
    /// Base URL, required for the remote scorer.
    pub endpoint: Option<String>,
    pub timeout: Duration,
}

impl Default for ScorerBinding {
    fn default() -> Self {
        ScorerBinding {
            kind: ScorerKind::Lexical,
            threshold: DEFAULT_THRESHOLD,
            endpoint: None,
            timeout: Duration::from_secs(30),
        }
    }
}

impl ScorerBinding {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if self.kind == ScorerKind::Remote && self.endpoint.is_none() {
            return Err(Error::InvalidArgument("remote scorer needs an endpoint".into()));
        }
        Ok(())
    }

    pub fn build(&self, lexicon: &Lexicon) -> Result<Box<dyn FragmentScorer>> {
        self.validate()?;
        Ok(match self.kind {
            ScorerKind::Lexical => Box::new(LexicalScorer::new(lexicon.clone(), self.threshold)),
            ScorerKind::Remote => Box::new(RemoteScorer::new(
                self.endpoint.as_deref().expect("validated"),
                self.timeout,
            )),
        })
    }
}

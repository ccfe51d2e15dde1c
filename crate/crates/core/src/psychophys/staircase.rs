//! Interleaved up/down staircase over `A^AM ∈ [0, 1]` in 0.02 steps.
//!
//! Levels are held as integer indices so the visited values are exactly
//! `k / 50`. A "yes" moves the level down, a "no" moves it up, and a response
//! that differs from the previous one records a reversal at the current value.
//! The first response of a series is compared against the response the series
//! starts out expecting ("no" for ascending, "yes" for descending). A step that
//! would leave `[0, 1]` records a reversal at the boundary instead of moving,
//! which bounds the trial count for observers pinned at either end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STEP: f64 = 0.02;
pub const LEVELS: u32 = 50;
pub const REVERSALS_PER_SERIES: usize = 6;
/// Reversals per series that enter the threshold estimate.
pub const ESTIMATE_REVERSALS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Ascending,
    Descending,
}

impl Series {
    pub fn as_str(self) -> &'static str {
        match self {
            Series::Ascending => "ascending",
            Series::Descending => "descending",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Yes,
    No,
}

impl Response {
    pub fn flipped(self) -> Self {
        match self {
            Response::Yes => Response::No,
            Response::No => Response::Yes,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Response::Yes => "yes",
            Response::No => "no",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseState {
    pub series: Series,
    level: u32,
    pub reversals: Vec<f64>,
    pub last_response: Option<Response>,
    pub finished: bool,
}

impl StaircaseState {
    pub fn new(series: Series) -> Self {
        Self {
            series,
            level: match series {
                Series::Ascending => 0,
                Series::Descending => LEVELS,
            },
            reversals: Vec::with_capacity(REVERSALS_PER_SERIES),
            last_response: None,
            finished: false,
        }
    }

    pub fn ascending() -> Self {
        Self::new(Series::Ascending)
    }

    pub fn descending() -> Self {
        Self::new(Series::Descending)
    }

    /// Value presented on the next trial.
    pub fn current(&self) -> f64 {
        self.level as f64 / LEVELS as f64
    }

    pub fn step(&self) -> f64 {
        STEP
    }

    fn expected_first(&self) -> Response {
        match self.series {
            Series::Ascending => Response::No,
            Series::Descending => Response::Yes,
        }
    }
}

/// Advance one trial; stepping a finished series is an error.
pub fn staircase_next(state: &StaircaseState, response: Response) -> Result<StaircaseState> {
    if state.finished {
        return Err(Error::State(format!(
            "{} series already finished after {} reversals",
            state.series.as_str(),
            state.reversals.len()
        )));
    }
    let mut next = state.clone();
    let previous = state.last_response.unwrap_or_else(|| state.expected_first());
    let target = match response {
        Response::Yes => state.level.checked_sub(1),
        Response::No => Some(state.level + 1).filter(|&l| l <= LEVELS),
    };
    if response != previous || target.is_none() {
        next.reversals.push(state.current());
    }
    if let Some(l) = target {
        next.level = l;
    }
    next.last_response = Some(response);
    next.finished = next.reversals.len() >= REVERSALS_PER_SERIES;
    Ok(next)
}

/// Mean of the last three reversals of each finished series.
pub fn staircase_estimate(asc: &StaircaseState, desc: &StaircaseState) -> Result<f64> {
    for s in [asc, desc] {
        if !s.finished {
            return Err(Error::State(format!(
                "{} series unfinished ({} of {REVERSALS_PER_SERIES} reversals)",
                s.series.as_str(),
                s.reversals.len()
            )));
        }
    }
    let tail = |s: &StaircaseState| {
        let n = s.reversals.len();
        s.reversals[n - ESTIMATE_REVERSALS..].iter().sum::<f64>()
    };
    Ok((tail(asc) + tail(desc)) / (2 * ESTIMATE_REVERSALS) as f64)
}

/// Synthetic participant: says "yes" when the presented value reaches the
/// threshold, with each response flipped with probability `lapse_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverModel {
    pub threshold: f64,
    #[serde(default)]
    pub lapse_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ObserverModel {
    pub fn new(threshold: f64, lapse_rate: f64, seed: u64) -> Result<Self> {
        let m = Self {
            threshold,
            lapse_rate,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        if !(0.0..0.5).contains(&self.lapse_rate) {
            return Err(Error::Config(format!(
                "lapse_rate must be in [0, 0.5), got {}",
                self.lapse_rate
            )));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn ideal_response(&self, value: f64) -> Response {
        if value >= self.threshold {
            Response::Yes
        } else {
            Response::No
        }
    }
}

/// Order in which the two series take turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interleave {
    #[default]
    Alternate,
    /// Each trial goes to a randomly chosen unfinished series.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub series: Series,
    pub value: f64,
    pub response: Response,
    pub reversal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRun {
    pub estimate: f64,
    pub ascending: StaircaseState,
    pub descending: StaircaseState,
    pub trials: Vec<TrialRecord>,
}

impl ObserverRun {
    pub fn reversal_count(&self) -> usize {
        self.ascending.reversals.len() + self.descending.reversals.len()
    }

    /// CSV with header `trial,series,value,response,reversal`.
    pub fn write_trials_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,series,value,response,reversal")?;
        for (i, t) in self.trials.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{}",
                t.series.as_str(),
                t.value,
                t.response.as_str(),
                u8::from(t.reversal)
            )?;
        }
        Ok(())
    }
}

/// Run both series to completion against `model` and return the estimate.
pub fn run_observer(model: &ObserverModel, interleave: Interleave) -> Result<ObserverRun> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut states = [StaircaseState::ascending(), StaircaseState::descending()];
    let mut trials = Vec::new();
    let mut turn = 0usize;
    while !(states[0].finished && states[1].finished) {
        let pick = match (states[0].finished, states[1].finished) {
            (true, _) => 1,
            (_, true) => 0,
            _ => match interleave {
                Interleave::Alternate => {
                    turn ^= 1;
                    turn ^ 1
                }
                Interleave::Random => usize::from(rng.gen_bool(0.5)),
            },
        };
        let s = &states[pick];
        let value = s.current();
        let mut response = model.ideal_response(value);
        if model.lapse_rate > 0.0 && rng.gen_bool(model.lapse_rate) {
            response = response.flipped();
        }
        let next = staircase_next(s, response)?;
        trials.push(TrialRecord {
            series: s.series,
            value,
            response,
            reversal: next.reversals.len() > s.reversals.len(),
        });
        states[pick] = next;
    }
    let [ascending, descending] = states;
    Ok(ObserverRun {
        estimate: staircase_estimate(&ascending, &descending)?,
        ascending,
        descending,
        trials,
    })
}

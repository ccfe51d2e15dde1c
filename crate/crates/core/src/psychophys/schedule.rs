//! Seeded trial orders for the rating, discrimination and stroking experiments.
//!
//! The multiset of trials depends only on the experiment; the seed only
//! permutes it.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stimulus::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    /// Intensity ratings over 11 `A^AM` steps.
    Exp2,
    /// Texture discrimination.
    Exp3,
    /// Stroking comparison against real materials.
    Exp4,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Exp2, Experiment::Exp3, Experiment::Exp4];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp4 => "exp4",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| Error::Lookup {
                kind: "experiment",
                name: s.to_string(),
                valid: Self::ALL.iter().map(|e| e.tag()).collect::<Vec<_>>().join(", "),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Material {
    GlassMarble,
    CottonFabric,
    Sandpaper100,
    ArtificialTurf,
}

impl Material {
    pub const ALL: [Material; 4] = [
        Material::GlassMarble,
        Material::CottonFabric,
        Material::Sandpaper100,
        Material::ArtificialTurf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Material::GlassMarble => "glass-marble",
            Material::CottonFabric => "cotton-fabric",
            Material::Sandpaper100 => "sandpaper-100",
            Material::ArtificialTurf => "artificial-turf",
        }
    }
}

/// What is presented on a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Stimulus(Preset),
    /// Glass marble stroked in place of an ultrasound stimulus.
    Control,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Stimulus(p) => f.write_str(p.name()),
            Condition::Control => f.write_str("control"),
        }
    }
}

/// Stimulus presented as the comparison anchor of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reference {
    None,
    /// Same modulation type at `A^AM = 1` with the foci held still.
    SameTypeStatic,
    /// The unmodulated pressure stimulus.
    PressureOnly,
    /// The real material stroked before the stimulus.
    Material(Material),
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::None => f.write_str(""),
            Reference::SameTypeStatic => f.write_str("same-type-am1-static"),
            Reference::PressureOnly => f.write_str(Preset::Lm.name()),
            Reference::Material(m) => f.write_str(m.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    /// `vibration` or `pressure` for rating blocks, otherwise the experiment tag.
    pub block: &'static str,
    pub condition: Condition,
    /// `A^AM` for rating trials, `A^max` otherwise.
    pub parameter: f64,
    pub repetition: u32,
    /// Presentation time, s.
    pub duration: f64,
    pub reference: Reference,
}

impl Trial {
    fn key(&self) -> (&'static str, Condition, u64, u32, Reference) {
        (
            self.block,
            self.condition,
            self.parameter.to_bits(),
            self.repetition,
            self.reference,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSchedule {
    pub experiment: Experiment,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

/// Rating-block stimuli.
pub const RATING_SET: [Preset; 4] = Preset::SWEEP_SET;
pub const RATING_STEPS: usize = 11;
pub const DISCRIMINATION_REPEATS: u32 = 2;
pub const DISCRIMINATION_DURATION: f64 = 0.5;

/// `A^max` used for a texture stimulus after intensity equalization. Only the
/// anchor stimulus has a fixed value; the rest default to full drive.
pub fn equalized_a_max(p: Preset) -> f64 {
    match p {
        Preset::Am30Strong => 0.9,
        _ => 1.0,
    }
}

impl TrialSchedule {
    /// Trials sorted into a seed-independent canonical order.
    pub fn canonical(&self) -> Vec<Trial> {
        let mut t = self.trials.clone();
        t.sort_by(|a, b| a.key().cmp(&b.key()));
        t
    }

    /// CSV with header `index,block,condition,parameter,repetition,duration_s,reference`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,block,condition,parameter,repetition,duration_s,reference")?;
        for (i, t) in self.trials.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{},{}",
                t.block, t.condition, t.parameter, t.repetition, t.duration, t.reference
            )?;
        }
        Ok(())
    }
}

pub fn schedule(experiment: Experiment, seed: u64) -> TrialSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = match experiment {
        Experiment::Exp2 => rating_blocks(&mut rng),
        Experiment::Exp3 => {
            let mut t: Vec<Trial> = Preset::TEXTURE_SET
                .iter()
                .flat_map(|&p| {
                    (0..DISCRIMINATION_REPEATS).map(move |rep| Trial {
                        block: "exp3",
                        condition: Condition::Stimulus(p),
                        parameter: equalized_a_max(p),
                        repetition: rep,
                        duration: DISCRIMINATION_DURATION,
                        reference: Reference::None,
                    })
                })
                .collect();
            t.shuffle(&mut rng);
            t
        }
        Experiment::Exp4 => {
            let conditions = Preset::TEXTURE_SET
                .iter()
                .map(|&p| Condition::Stimulus(p))
                .chain([Condition::Control]);
            let mut t: Vec<Trial> = conditions
                .flat_map(|c| {
                    Material::ALL.iter().map(move |&m| Trial {
                        block: "exp4",
                        condition: c,
                        parameter: match c {
                            Condition::Stimulus(p) => equalized_a_max(p),
                            Condition::Control => 0.0,
                        },
                        repetition: 0,
                        duration: 0.07 / 0.018,
                        reference: Reference::Material(m),
                    })
                })
                .collect();
            t.shuffle(&mut rng);
            t
        }
    };
    TrialSchedule {
        experiment,
        seed,
        trials,
    }
}

/// Schedule by tag; unknown tags are a lookup error listing the valid ones.
pub fn schedule_by_tag(tag: &str, seed: u64) -> Result<TrialSchedule> {
    Ok(schedule(tag.parse()?, seed))
}

/// Vibration block then pressure block; within a block each stimulus type runs
/// all its steps before the next type, with both orders shuffled.
fn rating_blocks(rng: &mut ChaCha8Rng) -> Vec<Trial> {
    let mut out = Vec::with_capacity(2 * RATING_SET.len() * RATING_STEPS);
    for (block, reference) in [
        ("vibration", Reference::SameTypeStatic),
        ("pressure", Reference::PressureOnly),
    ] {
        let mut types = RATING_SET;
        types.shuffle(rng);
        for p in types {
            let mut steps: Vec<usize> = (0..RATING_STEPS).collect();
            steps.shuffle(rng);
            out.extend(steps.into_iter().map(|k| Trial {
                block,
                condition: Condition::Stimulus(p),
                parameter: k as f64 / (RATING_STEPS - 1) as f64,
                repetition: 0,
                duration: 1.0,
                reference,
            }));
        }
    }
    out
}

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MushraError, Result};
use crate::audio::{make_anchor, write_wav, AnchorKind, AudioClip, WavFormat, ANCHOR_SAMPLE_RATE};

/// Name of the hidden-reference condition in every trial.
pub const REFERENCE_CONDITION: &str = "reference";

const DURATION_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    HiddenReference,
    System,
    Anchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub name: String,
    pub kind: ConditionKind,
    pub audio: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub id: String,
    pub conditions: Vec<ConditionSpec>,
}

impl TrialSpec {
    pub fn condition(&self, name: &str) -> Option<&ConditionSpec> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn reference(&self) -> &ConditionSpec {
        self.condition(REFERENCE_CONDITION)
            .expect("validated campaigns always carry a reference")
    }
}

/// A validated campaign manifest. Per-listener presentation orders and
/// audio tokens are pure functions of `seed`, so nothing else needs storing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MushraCampaign {
    pub seed: u64,
    pub systems: Vec<String>,
    pub trials: Vec<TrialSpec>,
}

/// Opaque label for a presentation position: A..Z, then AA, AB, ...
pub fn blind_label(position: usize) -> String {
    let mut n = position + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn is_safe_id(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b"_-.".contains(&b))
}

/// Condition names are lowercase so they can never collide with a blind label.
fn is_condition_name(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b"_-.".contains(&b))
        && s.as_bytes()[0].is_ascii_lowercase()
}

fn reserved(name: &str) -> bool {
    name == REFERENCE_CONDITION || AnchorKind::ALL.iter().any(|k| k.name() == name)
}

fn check_system_name(name: &str) -> Result<()> {
    if !is_condition_name(name) {
        return Err(MushraError::InvalidCampaign(format!(
            "system name `{name}` must be lowercase letters, digits, `_`, `-` or `.`"
        )));
    }
    if reserved(name) {
        return Err(MushraError::InvalidCampaign(format!("system name `{name}` is reserved")));
    }
    Ok(())
}

fn derive_seed(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

impl MushraCampaign {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(MushraError::InvalidCampaign(m));
        if self.trials.is_empty() {
            return invalid("campaign has no trials".into());
        }
        for s in &self.systems {
            check_system_name(s)?;
        }
        let mut ids = HashSet::new();
        for trial in &self.trials {
            if !is_safe_id(&trial.id) {
                return invalid(format!("trial id `{}` is not a safe identifier", trial.id));
            }
            if !ids.insert(trial.id.as_str()) {
                return invalid(format!("duplicate trial id `{}`", trial.id));
            }
            let mut names = HashSet::new();
            for c in &trial.conditions {
                if !names.insert(c.name.as_str()) {
                    return invalid(format!("trial `{}` lists `{}` twice", trial.id, c.name));
                }
                let expected = if c.name == REFERENCE_CONDITION {
                    ConditionKind::HiddenReference
                } else if AnchorKind::ALL.iter().any(|k| k.name() == c.name) {
                    ConditionKind::Anchor
                } else if self.systems.contains(&c.name) {
                    ConditionKind::System
                } else {
                    return invalid(format!("trial `{}` has unknown condition `{}`", trial.id, c.name));
                };
                if c.kind != expected {
                    return invalid(format!("condition `{}` must have kind {expected:?}", c.name));
                }
            }
            for required in [REFERENCE_CONDITION]
                .into_iter()
                .chain(AnchorKind::ALL.iter().map(|k| k.name()))
                .chain(self.systems.iter().map(String::as_str))
            {
                if !names.contains(required) {
                    return invalid(format!("trial `{}` is missing `{required}`", trial.id));
                }
            }
        }
        Ok(())
    }

    pub fn trial_index(&self, id: &str) -> Option<usize> {
        self.trials.iter().position(|t| t.id == id)
    }

    fn rng(&self, parts: &[&[u8]]) -> ChaCha8Rng {
        let mut all: Vec<&[u8]> = Vec::with_capacity(parts.len() + 1);
        let seed = self.seed.to_le_bytes();
        all.push(&seed);
        all.extend_from_slice(parts);
        ChaCha8Rng::from_seed(derive_seed(&all))
    }

    /// Trial presentation order for a listener, as indices into `trials`.
    pub fn trial_order(&self, listener: &str) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.trials.len()).collect();
        order.shuffle(&mut self.rng(&[b"trials", listener.as_bytes()]));
        order
    }

    /// Condition presentation order for a (listener, trial) pair, as indices
    /// into that trial's `conditions`. Position `p` is shown as
    /// `blind_label(p)`.
    pub fn condition_order(&self, listener: &str, trial: usize) -> Vec<usize> {
        let t = &self.trials[trial];
        let mut order: Vec<usize> = (0..t.conditions.len()).collect();
        order.shuffle(&mut self.rng(&[b"conditions", listener.as_bytes(), t.id.as_bytes()]));
        order
    }

    fn token(&self, trial: usize, what: &str) -> String {
        let seed = self.seed.to_le_bytes();
        let d = derive_seed(&[b"audio", &seed, self.trials[trial].id.as_bytes(), what.as_bytes()]);
        hex::encode(&d[..16])
    }

    /// Opaque resource token for one condition's audio.
    pub fn audio_token(&self, trial: usize, condition: usize) -> String {
        self.token(trial, &self.trials[trial].conditions[condition].name)
    }

    /// Token for the open (labelled) reference; distinct from the hidden one.
    pub fn reference_token(&self, trial: usize) -> String {
        self.token(trial, "\0open-reference")
    }

    /// Every servable token with the file behind it.
    pub fn audio_tokens(&self) -> Vec<(String, PathBuf)> {
        let mut out = Vec::new();
        for (ti, trial) in self.trials.iter().enumerate() {
            out.push((self.reference_token(ti), trial.reference().audio.clone()));
            for (ci, c) in trial.conditions.iter().enumerate() {
                out.push((self.audio_token(ti, ci), c.audio.clone()));
            }
        }
        out
    }
}

/// Reads a campaign manifest; relative audio paths resolve against the
/// manifest's directory.
pub fn load_campaign(path: impl AsRef<Path>) -> Result<MushraCampaign> {
    let path = path.as_ref();
    let mut campaign: MushraCampaign = serde_json::from_slice(&fs::read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for trial in &mut campaign.trials {
        for c in &mut trial.conditions {
            if c.audio.is_relative() {
                c.audio = base.join(&c.audio);
            }
        }
    }
    campaign.validate()?;
    Ok(campaign)
}

pub struct CampaignItem {
    pub id: String,
    pub reference: AudioClip,
}

/// A campaign whose stimuli are still in memory.
#[derive(Debug, Clone)]
pub struct BuiltCampaign {
    pub campaign: MushraCampaign,
    /// `audio[t][c]` is condition `c` of trial `t`.
    pub audio: Vec<Vec<AudioClip>>,
}

impl BuiltCampaign {
    /// Writes `audio/<trial>/<condition>.wav` and `campaign.json` under `dir`
    /// and returns the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>, format: WavFormat) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let mut manifest = self.campaign.clone();
        for (trial, clips) in manifest.trials.iter_mut().zip(&self.audio) {
            let rel_dir = Path::new("audio").join(&trial.id);
            fs::create_dir_all(dir.join(&rel_dir))?;
            for (c, clip) in trial.conditions.iter_mut().zip(clips) {
                let rel = rel_dir.join(format!("{}.wav", c.name));
                write_wav(clip, dir.join(&rel), format)?;
                c.audio = rel;
            }
        }
        let path = dir.join("campaign.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}

/// Assembles one trial per item: hidden reference, every system's output
/// for that item, and both anchors generated from the reference.
pub fn build_campaign(
    items: &[CampaignItem],
    system_outputs: &BTreeMap<String, Vec<AudioClip>>,
    seed: u64,
) -> Result<BuiltCampaign> {
    if items.is_empty() {
        return Err(MushraError::InvalidCampaign("no items".into()));
    }
    for name in system_outputs.keys() {
        check_system_name(name)?;
    }
    let mut trials = Vec::with_capacity(items.len());
    let mut audio = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let rate_check = |what: String, clip: &AudioClip| {
            if clip.sample_rate() != ANCHOR_SAMPLE_RATE {
                return Err(MushraError::RateMismatch {
                    what,
                    got: clip.sample_rate(),
                    expected: ANCHOR_SAMPLE_RATE,
                });
            }
            Ok(())
        };
        rate_check(item.id.clone(), &item.reference)?;
        let mut conditions = vec![ConditionSpec {
            name: REFERENCE_CONDITION.into(),
            kind: ConditionKind::HiddenReference,
            audio: PathBuf::new(),
        }];
        let mut clips = vec![item.reference.clone()];
        for (system, outputs) in system_outputs {
            let out = outputs.get(i).ok_or_else(|| MushraError::MissingSystemOutput {
                system: system.clone(),
                item: item.id.clone(),
            })?;
            let what = format!("{system}/{}", item.id);
            rate_check(what.clone(), out)?;
            let (got, expected) = (out.duration_secs(), item.reference.duration_secs());
            if (got - expected).abs() > DURATION_TOLERANCE * expected {
                return Err(MushraError::DurationMismatch { what, got, expected });
            }
            conditions.push(ConditionSpec {
                name: system.clone(),
                kind: ConditionKind::System,
                audio: PathBuf::new(),
            });
            clips.push(out.clone());
        }
        for kind in AnchorKind::ALL {
            conditions.push(ConditionSpec {
                name: kind.name().into(),
                kind: ConditionKind::Anchor,
                audio: PathBuf::new(),
            });
            clips.push(make_anchor(&item.reference, kind)?);
        }
        trials.push(TrialSpec {
            id: item.id.clone(),
            conditions,
        });
        audio.push(clips);
    }
    for (system, outputs) in system_outputs {
        if outputs.len() > items.len() {
            log::warn!("system `{system}` has {} outputs for {} items", outputs.len(), items.len());
        }
    }
    let campaign = MushraCampaign {
        seed,
        systems: system_outputs.keys().cloned().collect(),
        trials,
    };
    campaign.validate()?;
    Ok(BuiltCampaign { campaign, audio })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(len: usize, f: f64) -> AudioClip {
        AudioClip::from_fn(len, 48000, |t| 0.3 * (2.0 * std::f64::consts::PI * f * t).sin()).unwrap()
    }

    fn small(items: usize, systems: &[&str]) -> BuiltCampaign {
        let items: Vec<CampaignItem> = (0..items)
            .map(|i| CampaignItem {
                id: format!("item{i:02}"),
                reference: tone(4800, 440.0 + i as f64),
            })
            .collect();
        let outputs = systems
            .iter()
            .map(|s| (s.to_string(), items.iter().map(|it| it.reference.scaled(0.9).unwrap()).collect()))
            .collect();
        build_campaign(&items, &outputs, 11).unwrap()
    }

    #[test]
    fn twelve_items_three_systems_give_six_conditions_each() {
        let built = small(12, &["flowhigh", "hifigan", "mugan"]);
        assert_eq!(built.campaign.trials.len(), 12);
        for (trial, clips) in built.campaign.trials.iter().zip(&built.audio) {
            assert_eq!(trial.conditions.len(), 6);
            assert_eq!(clips.len(), 6);
            let names: HashSet<_> = trial.conditions.iter().map(|c| c.name.as_str()).collect();
            for n in ["reference", "flowhigh", "hifigan", "mugan", "lowpass_3500", "splineup_7000"] {
                assert!(names.contains(n), "{n}");
            }
        }
    }

    #[test]
    fn orders_are_deterministic_permutations() {
        let c = small(5, &["a", "b", "c"]).campaign;
        let order = c.condition_order("alice", 2);
        assert_eq!(order, c.condition_order("alice", 2));
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        let mut t = c.trial_order("alice");
        t.sort();
        assert_eq!(t, (0..5).collect::<Vec<_>>());
        // Different listeners see different orders somewhere.
        assert!((0..5).any(|i| c.condition_order("bob", i) != c.condition_order("alice", i)));
    }

    #[test]
    fn labels() {
        assert_eq!(blind_label(0), "A");
        assert_eq!(blind_label(5), "F");
        assert_eq!(blind_label(25), "Z");
        assert_eq!(blind_label(26), "AA");
        assert!(!is_condition_name("A"));
    }

    #[test]
    fn tokens_are_unique_and_opaque() {
        let c = small(3, &["x1", "x2", "x3"]).campaign;
        let tokens = c.audio_tokens();
        let distinct: HashSet<_> = tokens.iter().map(|(t, _)| t.clone()).collect();
        assert_eq!(distinct.len(), tokens.len());
        for (t, _) in &tokens {
            assert_eq!(t.len(), 32);
            assert!(!t.contains("reference"));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let items = vec![CampaignItem {
            id: "a".into(),
            reference: tone(4800, 300.0),
        }];
        let mut outputs = BTreeMap::new();
        outputs.insert("sys".to_string(), vec![]);
        assert!(matches!(
            build_campaign(&items, &outputs, 1),
            Err(MushraError::MissingSystemOutput { .. })
        ));
        outputs.insert(
            "sys".to_string(),
            vec![AudioClip::new(vec![0.0; 1600], 16000).unwrap()],
        );
        assert!(matches!(build_campaign(&items, &outputs, 1), Err(MushraError::RateMismatch { .. })));
        outputs.insert("sys".to_string(), vec![tone(5000, 300.0)]);
        assert!(matches!(
            build_campaign(&items, &outputs, 1),
            Err(MushraError::DurationMismatch { .. })
        ));
        outputs.insert("sys".to_string(), vec![tone(4830, 300.0)]);
        assert!(build_campaign(&items, &outputs, 1).is_ok());
        for bad in ["reference", "lowpass_3500", "B", ""] {
            let mut o = BTreeMap::new();
            o.insert(bad.to_string(), vec![tone(4800, 300.0)]);
            assert!(matches!(build_campaign(&items, &o, 1), Err(MushraError::InvalidCampaign(_))));
        }
    }

    #[test]
    fn manifest_round_trip() {
        let built = small(2, &["sys"]);
        let dir = tempfile::tempdir().unwrap();
        let path = built.write(dir.path(), WavFormat::Float32).unwrap();
        let loaded = load_campaign(&path).unwrap();
        assert_eq!(loaded.seed, 11);
        assert_eq!(loaded.trials.len(), 2);
        for t in &loaded.trials {
            for c in &t.conditions {
                assert!(c.audio.is_file(), "{}", c.audio.display());
            }
        }
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"audio/item00/reference.wav\""));
    }

    #[test]
    fn validation_catches_missing_anchor() {
        let mut c = small(1, &["sys"]).campaign;
        c.trials[0].conditions.retain(|c| c.name != "splineup_7000");
        assert!(matches!(c.validate(), Err(MushraError::InvalidCampaign(_))));
    }
}

//! Run settings: one flat key=value namespace shared by config files and
//! command-line flags. Files supply any subset; flags override; unknown keys
//! are hard errors so typos never silently fall back to defaults.

use crate::agents::Algo;
use crate::arch::ArchId;
use crate::env::Mode;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Every tunable of a run, pre-resolution. `episodes` stays optional because
/// its default depends on the scenario (1000 for the empty room, 1500 for the
/// obstacle room).
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub algo: Option<Algo>,
    pub arch: Option<ArchId>,
    pub scenario: String,
    pub mode: Mode,
    pub episodes: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub run_id: Option<String>,
    pub dt: f64,
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub batch: usize,
    pub buffer: usize,
    pub warmup: usize,
    pub step_limit: usize,
    pub eval_every: usize,
    pub eval_trials: usize,
    pub stop_at: Option<f64>,
}

impl Default for Settings {
    fn default() -> Settings {
        Settings {
            algo: None,
            arch: None,
            scenario: "1".into(),
            mode: Mode::TwoD,
            episodes: None,
            seed: 0,
            out: None,
            run_id: None,
            dt: crate::env::DT,
            lr: 1e-3,
            gamma: 0.99,
            tau: 0.005,
            alpha: 0.2,
            batch: 256,
            buffer: 500_000,
            warmup: 1000,
            step_limit: 500,
            eval_every: 100,
            eval_trials: 0,
            stop_at: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::config(format!("setting '{key}': cannot parse '{value}'")))
}

impl Settings {
    /// Apply one key=value pair. Key names mirror the CLI flag names with
    /// dashes and underscores interchangeable.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "algo" => self.algo = Some(Algo::parse(value)?),
            "arch" => self.arch = Some(ArchId::parse(value)?),
            "scenario" => self.scenario = value.to_string(),
            "mode" => self.mode = Mode::parse(value)?,
            "episodes" => self.episodes = Some(parse_num(&key, value)?),
            "seed" => self.seed = parse_num(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "run_id" => self.run_id = Some(value.to_string()),
            "dt" => self.dt = parse_num(&key, value)?,
            "lr" => self.lr = parse_num(&key, value)?,
            "gamma" => self.gamma = parse_num(&key, value)?,
            "tau" => self.tau = parse_num(&key, value)?,
            "alpha" => self.alpha = parse_num(&key, value)?,
            "batch" => self.batch = parse_num(&key, value)?,
            "buffer" => self.buffer = parse_num(&key, value)?,
            "warmup" => self.warmup = parse_num(&key, value)?,
            "step_limit" => self.step_limit = parse_num(&key, value)?,
            "eval_every" => self.eval_every = parse_num(&key, value)?,
            "eval_trials" => self.eval_trials = parse_num(&key, value)?,
            "stop_at" => self.stop_at = Some(parse_num(&key, value)?),
            other => {
                return Err(Error::config(format!("unknown configuration key '{other}'")));
            }
        }
        Ok(())
    }

    /// Merge a flat key=value file into these settings. `#` starts a comment;
    /// blank lines are skipped.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config file {}", path.display()), e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!(
                    "{}:{}: expected 'key = value', got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply(key, value).map_err(|e| {
                Error::config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let mut s = Settings::default();
        s.merge_file(path)?;
        Ok(s)
    }

    /// Canonical key=value echo of the resolved settings, ordered and
    /// formatted deterministically; this text is what run manifests store and
    /// what the run-id hash digests.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        if let Some(a) = self.algo {
            writeln!(s, "algo = {a}").unwrap();
        }
        if let Some(a) = self.arch {
            writeln!(s, "arch = {a}").unwrap();
        }
        writeln!(s, "scenario = {}", self.scenario).unwrap();
        writeln!(s, "mode = {}", self.mode.as_str()).unwrap();
        if let Some(e) = self.episodes {
            writeln!(s, "episodes = {e}").unwrap();
        }
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "dt = {}", self.dt).unwrap();
        writeln!(s, "lr = {}", self.lr).unwrap();
        writeln!(s, "gamma = {}", self.gamma).unwrap();
        writeln!(s, "tau = {}", self.tau).unwrap();
        writeln!(s, "alpha = {}", self.alpha).unwrap();
        writeln!(s, "batch = {}", self.batch).unwrap();
        writeln!(s, "buffer = {}", self.buffer).unwrap();
        writeln!(s, "warmup = {}", self.warmup).unwrap();
        writeln!(s, "step_limit = {}", self.step_limit).unwrap();
        writeln!(s, "eval_every = {}", self.eval_every).unwrap();
        writeln!(s, "eval_trials = {}", self.eval_trials).unwrap();
        if let Some(t) = self.stop_at {
            writeln!(s, "stop_at = {t}").unwrap();
        }
        s
    }

    /// FNV-1a hash of the canonical echo; the stable fingerprint inside run
    /// ids.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.echo().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_training_protocol() {
        let s = Settings::default();
        assert_eq!(s.lr, 1e-3);
        assert_eq!(s.batch, 256);
        assert_eq!(s.gamma, 0.99);
        assert_eq!(s.tau, 0.005);
        assert_eq!(s.alpha, 0.2);
        assert_eq!(s.buffer, 500_000);
        assert_eq!(s.warmup, 1000);
        assert_eq!(s.step_limit, 500);
        assert_eq!(s.eval_every, 100);
        assert!(s.episodes.is_none());
    }

    #[test]
    fn file_then_flag_override_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment line\nalgo = ddpg\narch=mlp3\nseed = 11\n\nepisodes = 40 # inline\n",
        )
        .unwrap();
        let mut s = Settings::from_file(&path).unwrap();
        assert_eq!(s.algo, Some(Algo::Ddpg));
        assert_eq!(s.arch, Some(ArchId::Mlp3));
        assert_eq!(s.seed, 11);
        assert_eq!(s.episodes, Some(40));
        // A later flag wins over the file.
        s.apply("seed", "99").unwrap();
        assert_eq!(s.seed, 99);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut s = Settings::default();
        assert!(s.apply("learning_rate", "0.1").is_err());
        assert!(s.apply("batch", "many").is_err());
        assert!(s.apply("algo", "a2c").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "just words\n").unwrap();
        assert!(Settings::from_file(&path).is_err());
    }

    #[test]
    fn dashes_and_underscores_are_interchangeable() {
        let mut s = Settings::default();
        s.apply("eval-every", "5").unwrap();
        s.apply("eval_trials", "3").unwrap();
        assert_eq!((s.eval_every, s.eval_trials), (5, 3));
    }

    #[test]
    fn echo_is_stable_and_hash_tracks_content() {
        let mut a = Settings::default();
        a.apply("algo", "sac").unwrap();
        a.apply("arch", "mlp2").unwrap();
        let mut b = a.clone();
        assert_eq!(a.echo(), b.echo());
        assert_eq!(a.hash(), b.hash());
        b.apply("seed", "1").unwrap();
        assert_ne!(a.hash(), b.hash());
        // Echo round-trips through apply().
        let mut c = Settings::default();
        for line in a.echo().lines() {
            let (k, v) = line.split_once('=').unwrap();
            c.apply(k, v).unwrap();
        }
        assert_eq!(c.echo(), a.echo());
    }
}

//! Environment-variable overrides for the scheduling knobs.
//!
//! | variable                 | value                                   |
//! |--------------------------|-----------------------------------------|
//! | `AMPGEMM_POLICY`         | `single`, `sss`, `sas`, `ca-sas`, `das`, `ca-das` |
//! | `AMPGEMM_RATIO`          | `3`, `5/2`, `2.5`                       |
//! | `AMPGEMM_THREADS_FAST`   | thread count of the fast cluster        |
//! | `AMPGEMM_THREADS_SLOW`   | thread count of the slow cluster        |
//! | `AMPGEMM_COARSE`         | `1`, `3` or `none`                      |
//! | `AMPGEMM_FINE`           | `4`, `5` or `45`                        |
//! | `AMPGEMM_FAST_CONFIG`    | path of the fast-cluster profile        |
//! | `AMPGEMM_SLOW_CONFIG`    | path of the slow-cluster profile        |
//!
//! Explicit command-line flags win over the environment.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{CoarseLoop, FineLoops, Ratio};
use crate::scheduler::SchedulingPolicy;

pub const POLICY: &str = "AMPGEMM_POLICY";
pub const RATIO: &str = "AMPGEMM_RATIO";
pub const THREADS_FAST: &str = "AMPGEMM_THREADS_FAST";
pub const THREADS_SLOW: &str = "AMPGEMM_THREADS_SLOW";
pub const COARSE: &str = "AMPGEMM_COARSE";
pub const FINE: &str = "AMPGEMM_FINE";
pub const FAST_CONFIG: &str = "AMPGEMM_FAST_CONFIG";
pub const SLOW_CONFIG: &str = "AMPGEMM_SLOW_CONFIG";

/// Coarse-loop choice, where `None` means "no coarse split".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoarseChoice {
    None,
    Loop(CoarseLoop),
}

impl CoarseChoice {
    pub fn loop_id(self) -> Option<CoarseLoop> {
        match self {
            CoarseChoice::None => None,
            CoarseChoice::Loop(l) => Some(l),
        }
    }
}

impl std::str::FromStr for CoarseChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "0" | "" => Ok(CoarseChoice::None),
            "1" => Ok(CoarseChoice::Loop(CoarseLoop::Loop1)),
            "3" => Ok(CoarseChoice::Loop(CoarseLoop::Loop3)),
            "2" => Err(Error::Config(
                "LOOP2_RACE: Loop 2 cannot be the coarse loop, threads would race on C".into(),
            )),
            other => Err(Error::Config(format!("coarse loop must be 1, 3 or none, got {other:?}"))),
        }
    }
}

/// Every knob that can be set from the environment. `None` means unset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub policy: Option<SchedulingPolicy>,
    pub ratio: Option<Ratio>,
    pub threads_fast: Option<usize>,
    pub threads_slow: Option<usize>,
    pub coarse: Option<CoarseChoice>,
    pub fine: Option<FineLoops>,
    pub fast_config: Option<PathBuf>,
    pub slow_config: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(name: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{name}={value:?}: {e}")))
}

impl Overrides {
    pub fn from_env() -> Result<Self> {
        Self::from_vars(std::env::vars())
    }

    /// Reads overrides from `(name, value)` pairs; unknown names are ignored.
    pub fn from_vars<I, K, V>(vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut o = Overrides::default();
        for (k, v) in vars {
            let (k, v) = (k.as_ref(), v.as_ref());
            match k {
                POLICY => o.policy = Some(parse(k, v)?),
                RATIO => o.ratio = Some(parse(k, v)?),
                THREADS_FAST => o.threads_fast = Some(parse(k, v)?),
                THREADS_SLOW => o.threads_slow = Some(parse(k, v)?),
                COARSE => o.coarse = Some(parse(k, v)?),
                FINE => o.fine = Some(parse(k, v)?),
                FAST_CONFIG => o.fast_config = Some(PathBuf::from(v)),
                SLOW_CONFIG => o.slow_config = Some(PathBuf::from(v)),
                _ => {}
            }
        }
        Ok(o)
    }

    /// Fields set in `other` replace the ones in `self`.
    pub fn merged_with(mut self, other: &Overrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f.clone(); })*};
        }
        take!(policy, ratio, threads_fast, threads_slow, coarse, fine, fast_config, slow_config);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_every_knob() {
        let o = Overrides::from_vars([
            (POLICY, "CA_DAS"),
            (RATIO, "5/2"),
            (THREADS_FAST, "4"),
            (THREADS_SLOW, "2"),
            (COARSE, "3"),
            (FINE, "45"),
            (FAST_CONFIG, "a15.cfg"),
            (SLOW_CONFIG, "a7.cfg"),
            ("PATH", "/usr/bin"),
        ])
        .unwrap();
        assert_eq!(o.policy, Some(SchedulingPolicy::CaDas));
        assert_eq!(o.ratio, Some(Ratio::new(5, 2)));
        assert_eq!((o.threads_fast, o.threads_slow), (Some(4), Some(2)));
        assert_eq!(o.coarse, Some(CoarseChoice::Loop(CoarseLoop::Loop3)));
        assert_eq!(o.fine, Some(FineLoops::Both));
        assert_eq!(o.slow_config.unwrap(), PathBuf::from("a7.cfg"));
    }

    #[test]
    fn bad_values_are_reported_by_name() {
        let e = Overrides::from_vars([(RATIO, "fast")]).unwrap_err();
        assert!(e.to_string().contains(RATIO));
        let e = Overrides::from_vars([(COARSE, "2")]).unwrap_err();
        assert!(e.to_string().contains("LOOP2_RACE"));
    }

    #[test]
    fn explicit_values_win() {
        let env = Overrides::from_vars([(POLICY, "sss"), (RATIO, "3")]).unwrap();
        let cli = Overrides {
            policy: Some(SchedulingPolicy::Sas),
            ..Default::default()
        };
        let m = env.merged_with(&cli);
        assert_eq!(m.policy, Some(SchedulingPolicy::Sas));
        assert_eq!(m.ratio, Some(Ratio::integer(3)));
    }
}

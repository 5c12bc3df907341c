//! Machine profile files.
//!
//! A profile is a TOML document with one `[[cluster]]` table per core class:
//!
//! ```toml
//! [[cluster]]
//! class = "fast"
//! core_count = 4
//! l1d_bytes = 32768
//! l2_bytes = 2097152
//! n_c = 4096
//! k_c = 952
//! m_c = 152
//! m_r = 4
//! n_r = 4
//! emulated_slowdown = 1.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CacheConfig, ClusterSpec, CoreClass};

pub const EXYNOS5422_A15: &str = include_str!("../profiles/exynos5422-a15.cfg");
pub const EXYNOS5422_A7: &str = include_str!("../profiles/exynos5422-a7.cfg");
pub const EXYNOS5422_A7_SHARED_KC: &str = include_str!("../profiles/exynos5422-a7-shared-kc.cfg");

#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub clusters: Vec<ClusterSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    cluster: Vec<ClusterEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterEntry {
    class: CoreClass,
    core_count: usize,
    l1d_bytes: usize,
    l2_bytes: usize,
    n_c: usize,
    k_c: usize,
    m_c: usize,
    m_r: usize,
    n_r: usize,
    #[serde(default = "no_slowdown")]
    emulated_slowdown: f64,
}

fn no_slowdown() -> f64 {
    1.0
}

impl Profile {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, Path::new("<profile>"))
    }

    fn parse_named(text: &str, path: &Path) -> Result<Self> {
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            msg,
        };
        let doc: Document = toml::from_str(text).map_err(|e| err(e.message().to_string()))?;
        if doc.cluster.is_empty() {
            return Err(err("profile declares no [[cluster]]".into()));
        }
        let clusters = doc
            .cluster
            .into_iter()
            .map(|c| {
                let cfg = CacheConfig::new(c.n_c, c.k_c, c.m_c, c.m_r, c.n_r)
                    .map_err(|e| err(e.to_string()))?;
                Ok(ClusterSpec {
                    class: c.class,
                    core_count: c.core_count,
                    l1d_bytes: c.l1d_bytes,
                    l2_bytes: c.l2_bytes,
                    cache_config: cfg,
                    emulated_slowdown: c.emulated_slowdown,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { clusters })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_named(&text, path)
    }

    pub fn to_toml(&self) -> String {
        let doc = Document {
            cluster: self
                .clusters
                .iter()
                .map(|c| ClusterEntry {
                    class: c.class,
                    core_count: c.core_count,
                    l1d_bytes: c.l1d_bytes,
                    l2_bytes: c.l2_bytes,
                    n_c: c.cache_config.n_c,
                    k_c: c.cache_config.k_c,
                    m_c: c.cache_config.m_c,
                    m_r: c.cache_config.m_r,
                    n_r: c.cache_config.n_r,
                    emulated_slowdown: c.emulated_slowdown,
                })
                .collect(),
        };
        toml::to_string(&doc).expect("profile serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    /// The single cluster of a one-cluster profile.
    pub fn sole_cluster(&self) -> Result<&ClusterSpec> {
        match self.clusters.as_slice() {
            [c] => Ok(c),
            _ => Err(Error::Config(format!(
                "expected a single-cluster profile, found {} clusters",
                self.clusters.len()
            ))),
        }
    }

    pub fn cluster(&self, class: CoreClass) -> Option<&ClusterSpec> {
        self.clusters.iter().find(|c| c.class == class)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_profiles_carry_tuned_values() {
        let a15 = Profile::parse(EXYNOS5422_A15).unwrap();
        assert_eq!(a15.sole_cluster().unwrap(), &ClusterSpec::exynos_a15());
        let a7 = Profile::parse(EXYNOS5422_A7).unwrap();
        assert_eq!(a7.sole_cluster().unwrap(), &ClusterSpec::exynos_a7());
        let shared = Profile::parse(EXYNOS5422_A7_SHARED_KC).unwrap();
        assert_eq!(shared.clusters[0].cache_config, CacheConfig::exynos_a7_shared_kc());
    }

    #[test]
    fn round_trip_through_text() {
        let p = Profile {
            clusters: vec![ClusterSpec::exynos_a15(), ClusterSpec::exynos_a7().with_slowdown(4.0)],
        };
        assert_eq!(Profile::parse(&p.to_toml()).unwrap(), p);
    }

    #[test]
    fn zero_parameter_rejected() {
        let text = EXYNOS5422_A15.replace("m_r = 4", "m_r = 0");
        assert!(Profile::parse(&text).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{EXYNOS5422_A15}l3_bytes = 1\n");
        let e = Profile::parse(&text).unwrap_err().to_string();
        assert!(e.contains("l3_bytes"), "{e}");
    }
}

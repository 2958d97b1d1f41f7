//! Binary model artifact.
//!
//! All integers and reals are little-endian; reals are IEEE-754 `f64` bit
//! patterns, so a round trip is bit-exact.
//!
//! ```text
//! magic            8 bytes  "LABLSTM\0"
//! format_version   u32
//! target           u8       0 = TSH, 1 = TRAb
//! input_dim        u32
//! hidden_layers    u32
//! hidden_units     u32
//! dropout_rate     f64
//! init_stddev      f64
//! init_truncation  f64
//! train_seed       u64
//! feature_mean     f64 × input_dim
//! feature_std      f64 × input_dim
//! target_mean      f64
//! target_std       f64
//! param_count      u64
//! params           f64 × param_count   (flat order of `ParamLayout`)
//! ```
//!
//! Nothing may follow the parameters.

use std::io::Write;

use super::model::{ModelArtifact, Normalization};
use super::params::LstmParams;
use super::ModelConfig;
use crate::domain::Target;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LABLSTM\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn save<W: Write>(artifact: &ModelArtifact, mut out: W) -> Result<()> {
    artifact.check()?;
    let c = &artifact.config;
    let n = &artifact.normalization;
    let mut buf = Vec::with_capacity(128 + 8 * artifact.params.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(match c.target {
        Target::Tsh => 0,
        Target::Trab => 1,
    });
    for d in [c.input_dim, c.hidden_layers, c.hidden_units] {
        let d =
            u32::try_from(d).map_err(|_| Error::Format("model dimension exceeds u32".into()))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in [c.dropout_rate, c.init_stddev, c.init_truncation] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&artifact.train_seed.to_le_bytes());
    for v in n
        .feature_mean
        .iter()
        .chain(&n.feature_std)
        .chain([&n.target_mean, &n.target_std])
    {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(artifact.params.data.len() as u64).to_le_bytes());
    for v in &artifact.params.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
        .map_err(|e| Error::Format(format!("writing artifact: {e}")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated artifact: missing {what} at byte {}",
                    self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_bits(self.u64(what)?))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(what)).collect()
    }
}

pub fn load(bytes: &[u8]) -> Result<ModelArtifact> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8, "magic")? != MAGIC {
        return Err(Error::Format("not a model artifact (bad magic)".into()));
    }
    let version = cur.u32("format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let target = match cur.take(1, "target")?[0] {
        0 => Target::Tsh,
        1 => Target::Trab,
        other => return Err(Error::Format(format!("unknown target code {other}"))),
    };
    let input_dim = cur.u32("input_dim")? as usize;
    let hidden_layers = cur.u32("hidden_layers")? as usize;
    let hidden_units = cur.u32("hidden_units")? as usize;
    let config = ModelConfig {
        input_dim,
        hidden_layers,
        hidden_units,
        dropout_rate: cur.f64("dropout_rate")?,
        init_stddev: cur.f64("init_stddev")?,
        init_truncation: cur.f64("init_truncation")?,
        target,
    };
    config
        .check()
        .map_err(|e| Error::Format(format!("artifact config: {e}")))?;
    let train_seed = cur.u64("train_seed")?;
    let normalization = Normalization {
        feature_mean: cur.f64s(input_dim, "feature_mean")?,
        feature_std: cur.f64s(input_dim, "feature_std")?,
        target_mean: cur.f64("target_mean")?,
        target_std: cur.f64("target_std")?,
    };
    let layout = config.layout();
    let count = cur.u64("param_count")?;
    if count != layout.len as u64 {
        return Err(Error::Format(format!(
            "param_count {count} does not match the {} parameters of a {hidden_layers}×{hidden_units} model",
            layout.len
        )));
    }
    let data = cur.f64s(layout.len, "params")?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameters",
            bytes.len() - cur.pos
        )));
    }
    let artifact = ModelArtifact {
        params: LstmParams { layout, data },
        config,
        normalization,
        train_seed,
        format_version: version,
    };
    artifact.check()?;
    Ok(artifact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::init_params;

    fn artifact() -> ModelArtifact {
        let cfg = ModelConfig {
            hidden_units: 6,
            target: Target::Trab,
            ..Default::default()
        };
        let mut a = ModelArtifact::from_params(init_params(&cfg, 3), cfg);
        a.normalization.feature_mean = vec![0.0, 41.3, 7.1, 21.9, 0.8, 3.3];
        a.normalization.feature_std = vec![1.0, 12.5, 2.2, 6.0, 0.61, 2.9];
        a.normalization.target_mean = 1.0 / 3.0;
        a.normalization.target_std = std::f64::consts::PI;
        a.train_seed = u64::MAX - 5;
        a
    }

    fn bytes(a: &ModelArtifact) -> Vec<u8> {
        let mut b = Vec::new();
        save(a, &mut b).unwrap();
        b
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = artifact();
        let b = bytes(&a);
        let back = load(&b).unwrap();
        assert_eq!(back, a);
        assert_eq!(bytes(&back), b);
    }

    #[test]
    fn truncation_is_detected() {
        let b = bytes(&artifact());
        for cut in [0, 7, 12, 60, b.len() - 1] {
            assert!(
                matches!(load(&b[..cut]), Err(Error::Format(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn corrupted_length_is_detected() {
        let mut b = bytes(&artifact());
        // param_count sits right before the params block
        let n = artifact().params.data.len();
        let at = b.len() - 8 * n - 8;
        b[at] ^= 1;
        match load(&b) {
            Err(Error::Format(msg)) => assert!(msg.contains("param_count"), "{msg}"),
            other => panic!("{:?}", other.map(|_| ())),
        }
        let mut extra = bytes(&artifact());
        extra.push(0);
        assert!(load(&extra).is_err());
    }

    #[test]
    fn old_version_is_unsupported() {
        let mut b = bytes(&artifact());
        b[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            load(&b),
            Err(Error::UnsupportedVersion {
                found: 0,
                expected: 1
            })
        ));
    }

    #[test]
    fn bad_magic() {
        let mut b = bytes(&artifact());
        b[0] = b'X';
        assert!(matches!(load(&b), Err(Error::Format(_))));
    }
}

//! Binary model checkpoints.
//!
//! All integers are little-endian `u64` unless noted; all reals are
//! little-endian IEEE-754 `f64`.
//!
//! | field            | type         |
//! |------------------|--------------|
//! | magic            | 8 bytes `WCHDPCK\0` |
//! | version          | `u32` (= 1)  |
//! | V, K, T          | `u64` x 3    |
//! | eta, gamma, alpha, kappa, tau, local_tol | `f64` x 6 |
//! | batch_size, epochs, max_local_iters      | `u64` x 3 |
//! | step_count       | `u64`        |
//! | lambda           | `f64` x K*V, row-major (topic-major) |
//! | a                | `f64` x K    |
//! | b                | `f64` x K    |
//!
//! Nothing follows `b`; trailing bytes are rejected.

use std::io::{Read, Write};

use super::{GlobalState, HdpConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WCHDPCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: HdpConfig,
    pub state: GlobalState,
}

pub fn write_checkpoint<W: Write>(mut out: W, config: &HdpConfig, state: &GlobalState) -> std::io::Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for n in [state.vocab_size(), state.num_topics(), config.doc_truncation] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    for x in [config.eta, config.gamma, config.alpha, config.kappa, config.tau, config.local_tol] {
        out.write_all(&x.to_le_bytes())?;
    }
    for n in [config.batch_size, config.epochs, config.max_local_iters] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    out.write_all(&state.step_count().to_le_bytes())?;
    for x in state.lambda().iter().chain(state.a()).chain(state.b()) {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("reading {what}: {e}")))?;
        Ok(buf)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| Error::Checkpoint(format!("{what} too large")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(what)).collect()
    }
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Checkpoint> {
    let mut cur = Cursor { inner: input };
    let magic: [u8; 8] = cur.bytes("magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a model checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(cur.bytes("version")?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let v = cur.usize("V")?;
    let k = cur.usize("K")?;
    let t = cur.usize("T")?;
    let size = k
        .checked_mul(v)
        .filter(|&n| n <= (1 << 34))
        .ok_or_else(|| Error::Checkpoint(format!("implausible dimensions {k} x {v}")))?;
    let config = HdpConfig {
        corpus_truncation: k,
        doc_truncation: t,
        eta: cur.f64("eta")?,
        gamma: cur.f64("gamma")?,
        alpha: cur.f64("alpha")?,
        kappa: cur.f64("kappa")?,
        tau: cur.f64("tau")?,
        local_tol: cur.f64("local_tol")?,
        batch_size: cur.usize("batch_size")?,
        epochs: cur.usize("epochs")?,
        max_local_iters: cur.usize("max_local_iters")?,
    };
    config.validate()?;
    let step_count = cur.u64("step_count")?;
    let lambda = cur.f64s(size, "lambda")?;
    let a = cur.f64s(k, "a")?;
    let b = cur.f64s(k, "b")?;
    let mut rest = [0u8; 1];
    match cur.inner.read(&mut rest) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Checkpoint("trailing bytes after b".into())),
        Err(e) => return Err(Error::Checkpoint(e.to_string())),
    }
    let state = GlobalState::from_parts(v, lambda, a, b, step_count)?;
    Ok(Checkpoint { config, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdp::init_global;

    #[test]
    fn round_trip() {
        let config = HdpConfig {
            corpus_truncation: 4,
            doc_truncation: 2,
            eta: 0.3,
            ..Default::default()
        };
        let state = init_global(&config, 6, 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &config, &state).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 3 * 8 + 6 * 8 + 3 * 8 + 8 + (4 * 6 + 8) * 8);
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.config, config);
        assert_eq!(back.state, state);
    }

    #[test]
    fn layout_is_fixed() {
        let config = HdpConfig {
            corpus_truncation: 1,
            doc_truncation: 1,
            ..Default::default()
        };
        let state = GlobalState::from_parts(2, vec![0.5, 1.5], vec![1.0], vec![2.0], 7).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &config, &state).unwrap();
        assert_eq!(&buf[..8], b"WCHDPCK\0");
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..20], &2u64.to_le_bytes());
        let tail = &buf[buf.len() - 32..];
        assert_eq!(&tail[..8], &0.5f64.to_le_bytes());
        assert_eq!(&tail[24..], &2.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let config = HdpConfig {
            corpus_truncation: 2,
            doc_truncation: 1,
            ..Default::default()
        };
        let state = init_global(&config, 3, 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &config, &state).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
        let mut version = buf;
        version[8] = 2;
        assert!(read_checkpoint(version.as_slice()).is_err());
    }
}

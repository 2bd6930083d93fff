use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::net::{Mat, NetConfig, Network};
use super::PolicyNetwork;

const MAGIC: &[u8; 8] = b"OCFCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("tensor {0} missing from checkpoint")]
    Missing(String),
    #[error("unexpected tensor {0} in checkpoint")]
    Unexpected(String),
}

fn tensors(net: &PolicyNetwork) -> Vec<(String, &Mat)> {
    let live = net.live.params().into_iter().map(|(n, m)| (format!("live.{n}"), m));
    let target = net.target.params().into_iter().map(|(n, m)| (format!("target.{n}"), m));
    live.chain(target).collect()
}

/// Header (magic, version, network configuration) followed by named
/// row-major little-endian f64 tensors.
pub fn write_checkpoint(net: &PolicyNetwork, w: &mut impl Write) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let c = net.config();
    for v in [c.d_model, c.heads, c.layers, c.hidden, c.agent_dim, c.candidate_dim] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    let ts = tensors(net);
    w.write_all(&(ts.len() as u64).to_le_bytes())?;
    for (name, m) in ts {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&2u64.to_le_bytes())?;
        for d in m.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for x in m.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<PolicyNetwork, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = read_u64(r)? as usize;
    }
    let config = NetConfig {
        d_model: dims[0],
        heads: dims[1],
        layers: dims[2],
        hidden: dims[3],
        agent_dim: dims[4],
        candidate_dim: dims[5],
    };
    config.validate().map_err(CheckpointError::Config)?;

    let count = read_u64(r)?;
    let mut found: HashMap<String, Mat> = HashMap::new();
    for _ in 0..count {
        let len = read_u64(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8_lossy(&name).into_owned();
        let ndim = read_u64(r)? as usize;
        let shape: Vec<usize> = (0..ndim).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<_, _>>()?;
        if ndim != 2 {
            return Err(CheckpointError::Shape { name, expected: vec![0, 0], found: shape });
        }
        let mut data = Vec::with_capacity(shape[0] * shape[1]);
        for _ in 0..shape[0] * shape[1] {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        let m = Mat::from_shape_vec((shape[0], shape[1]), data).expect("length matches shape");
        found.insert(name, m);
    }

    let mut fill = |prefix: &str, net: &mut Network| -> Result<(), CheckpointError> {
        for (name, p) in net.params_mut() {
            let key = format!("{prefix}.{name}");
            let m = found.remove(&key).ok_or_else(|| CheckpointError::Missing(key.clone()))?;
            if m.shape() != p.shape() {
                return Err(CheckpointError::Shape { name: key, expected: p.shape().to_vec(), found: m.shape().to_vec() });
            }
            *p = m;
        }
        Ok(())
    };
    let mut net = PolicyNetwork::new(config, 0);
    fill("live", &mut net.live)?;
    fill("target", &mut net.target)?;
    if let Some(extra) = found.into_keys().min() {
        return Err(CheckpointError::Unexpected(extra));
    }
    Ok(net)
}

pub fn save_checkpoint(net: &PolicyNetwork, path: &Path) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    write_checkpoint(net, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyNetwork, CheckpointError> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice())
}

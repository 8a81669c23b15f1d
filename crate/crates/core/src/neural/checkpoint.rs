//! Parameter checkpoints: magic, a JSON header naming every network and its
//! layers, then all parameters as little-endian `f64` in header order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{LayerSpec, Network};
use crate::batch::{read_f64s, write_f64s};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AIRSNET\0";

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    layers: Vec<LayerSpec>,
    params: usize,
}

pub fn save_checkpoint<W: Write>(mut w: W, nets: &[(String, &Network)]) -> Result<()> {
    let header: Vec<Entry> = nets
        .iter()
        .map(|(name, n)| Entry {
            name: name.clone(),
            layers: n.layers().to_vec(),
            params: n.param_count(),
        })
        .collect();
    let header = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for (_, n) in nets {
        write_f64s(&mut w, n.params())?;
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Network)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a network checkpoint".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut header)?;
    let entries: Vec<Entry> = serde_json::from_slice(&header)?;
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let mut net = Network::zeros(e.layers)?;
        if net.param_count() != e.params {
            return Err(Error::Format(format!(
                "checkpoint entry {} declares {} params, layers imply {}",
                e.name,
                e.params,
                net.param_count()
            )));
        }
        let p = read_f64s(&mut r, e.params)?;
        net.params_mut().copy_from_slice(&p);
        out.push((e.name, net));
    }
    Ok(out)
}

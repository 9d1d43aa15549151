use std::io::{Read, Write};

use super::Snapshot;
use crate::error::{Error, Result};

const FRAME_MAGIC: &[u8; 4] = b"KMF1";

pub fn write_csv_header<W: Write>(w: &mut W, m: usize) -> Result<()> {
    write!(w, "run_id,t,i")?;
    for k in 1..=m {
        write!(w, ",u{k}")?;
    }
    for k in 1..=m {
        write!(w, ",v{k}")?;
    }
    writeln!(w)?;
    Ok(())
}

/// One row per particle. Floats use the shortest round-trip representation.
pub fn write_csv_rows<W: Write>(w: &mut W, run_id: &str, snap: &Snapshot) -> Result<()> {
    let mut line = String::new();
    for i in 0..snap.len() {
        use std::fmt::Write as _;
        line.clear();
        let _ = write!(line, "{},{},{}", run_id, snap.time, i);
        for x in snap.particle(i) {
            let _ = write!(line, ",{x}");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(w: &mut W, run_id: &str, snaps: &[Snapshot]) -> Result<()> {
    let m = snaps.first().map(|s| s.modes).unwrap_or(0);
    write_csv_header(w, m)?;
    for s in snaps {
        write_csv_rows(w, run_id, s)?;
    }
    Ok(())
}

/// Little-endian frame: magic, `N: u64`, `m: u64`, `t: f64`, step `u64`, then `N·2m` values.
pub fn write_frame<W: Write>(w: &mut W, snap: &Snapshot) -> Result<()> {
    w.write_all(FRAME_MAGIC)?;
    w.write_all(&(snap.len() as u64).to_le_bytes())?;
    w.write_all(&(snap.modes as u64).to_le_bytes())?;
    w.write_all(&snap.time.to_le_bytes())?;
    w.write_all(&snap.step_index.to_le_bytes())?;
    let mut buf = Vec::with_capacity(snap.states.len() * 8);
    for x in &snap.states {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Snapshot> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FRAME_MAGIC {
        return Err(Error::InconsistentTrajectory("bad frame magic".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let n = u64::from_le_bytes(next(r)?) as usize;
    let m = u64::from_le_bytes(next(r)?) as usize;
    let time = f64::from_le_bytes(next(r)?);
    let step_index = u64::from_le_bytes(next(r)?);
    if m == 0 || n == 0 {
        return Err(Error::InconsistentTrajectory("empty frame".into()));
    }
    let len = n
        .checked_mul(2 * m)
        .ok_or_else(|| Error::InconsistentTrajectory("frame size overflow".into()))?;
    let mut raw = vec![0u8; len * 8];
    r.read_exact(&mut raw)?;
    let states = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Snapshot {
        time,
        step_index,
        modes: m,
        states,
    })
}

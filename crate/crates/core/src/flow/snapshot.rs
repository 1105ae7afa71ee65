//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                         |
//! |-------|-------------------------------------------------|
//! | 4     | magic `ASNP`                                    |
//! | 4     | format version (`u32`, currently 1)             |
//! | 12    | cell counts `nx, ny, nz` (`u32` each)           |
//! | 8     | cell size δ in meters (`f64`)                   |
//! | 8     | simulation time in seconds (`f64`)              |
//! | 4     | number of fields (`u32`)                        |
//!
//! then per field: a `u8` field id (see [`FieldId`]), a `u64` value count
//! and that many `f64` values in grid storage order.

use std::io::{self, Read, Write};

use crate::geometry::Grid;

pub const MAGIC: &[u8; 4] = b"ASNP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FieldId {
    VelocityX = 0,
    VelocityY = 1,
    VelocityZ = 2,
    Pressure = 3,
    Concentration = 4,
}

impl FieldId {
    pub const ALL: [FieldId; 5] = [
        FieldId::VelocityX,
        FieldId::VelocityY,
        FieldId::VelocityZ,
        FieldId::Pressure,
        FieldId::Concentration,
    ];

    fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| *f as u8 == v)
    }

    fn data(self, grid: &Grid) -> &[f64] {
        match self {
            FieldId::VelocityX => &grid.vel[0],
            FieldId::VelocityY => &grid.vel[1],
            FieldId::VelocityZ => &grid.vel[2],
            FieldId::Pressure => &grid.pressure,
            FieldId::Concentration => &grid.conc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dims: [u32; 3],
    pub delta: f64,
    pub time: f64,
    pub fields: Vec<(FieldId, Vec<f64>)>,
}

pub fn write_snapshot<W: Write>(mut w: W, grid: &Grid, time: f64, fields: &[FieldId]) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in grid.dims {
        let d = u32::try_from(d).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "grid too large"))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&grid.delta.to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    w.write_all(&(fields.len() as u32).to_le_bytes())?;
    for field in fields {
        let data = field.data(grid);
        w.write_all(&[*field as u8])?;
        w.write_all(&(data.len() as u64).to_le_bytes())?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_snapshot<R: Read>(mut r: R) -> io::Result<Snapshot> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(invalid("not a snapshot file"));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(invalid(format!("unsupported snapshot version {version}")));
    }
    let mut dims = [0u32; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_array(&mut r)?);
    }
    let delta = f64::from_le_bytes(read_array(&mut r)?);
    let time = f64::from_le_bytes(read_array(&mut r)?);
    let count = u32::from_le_bytes(read_array(&mut r)?);
    let mut fields = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let [id] = read_array::<1, _>(&mut r)?;
        let id = FieldId::from_u8(id).ok_or_else(|| invalid(format!("unknown field id {id}")))?;
        let len = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        fields.push((id, data));
    }
    Ok(Snapshot {
        dims,
        delta,
        time,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Archetype, RoomSpec};

    #[test]
    fn snapshot_round_trip_and_header() {
        let room = RoomSpec {
            name: "s".into(),
            archetype: Archetype::Custom,
            length: 1.0,
            width: 0.6,
            height: 0.4,
            obstacles: vec![],
            seats: vec![],
            outlets: vec![],
        };
        let mut g = build_grid(&room, 0.1, &[]).unwrap();
        g.vel[0][3] = 0.25;
        g.conc[5] = 1e7;
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, 12.5, &FieldId::ALL).unwrap();
        assert_eq!(&buf[..4], b"ASNP");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        let snap = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(snap.dims, [10, 6, 4]);
        assert_eq!((snap.delta, snap.time), (0.1, 12.5));
        assert_eq!(snap.fields[0].1, g.vel[0]);
        assert_eq!(snap.fields[4], (FieldId::Concentration, g.conc.clone()));

        buf[0] = b'X';
        assert!(read_snapshot(buf.as_slice()).is_err());
    }
}

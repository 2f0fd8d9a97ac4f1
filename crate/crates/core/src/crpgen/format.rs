//! `PUFCRP1` datasets, `PUFMDL1` instance files and CSV export.
//!
//! Everything is little-endian. Challenge bits are packed LSB first: stage 1
//! of component 1 is bit 0 of the first challenge byte, and the components
//! of a CDC record follow one another without padding.
//!
//! Dataset header (26 bytes):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `PUFCRP1\0`                       |
//! | 8      | 1    | kind (0 APUF, 1 XOR, 2 CDC)             |
//! | 9      | 1    | k                                       |
//! | 10     | 2    | n                                       |
//! | 12     | 1    | flags (bit 0 repeats, bit 1 triple)     |
//! | 13     | 1    | reserved, 0                             |
//! | 14     | 4    | repeats per record                      |
//! | 18     | 8    | record count                            |
//!
//! Each record is `ceil(k' n / 8)` challenge bytes, one response byte
//! (bit 0 response, bits 1..=3 the triple when flagged) and, when flagged,
//! `ceil(repeats / 8)` repeat bytes.

use std::io::{Read, Write};

use crate::compose::{DesignSpec, PufKind, PufModel};
use crate::crpgen::{CrpDataset, CrpRecord};
use crate::delay::{ArbiterModel, Challenge, DelayModuleSpec, GateKind, TripleResponse};
use crate::error::{DecodeError, PufError, Result};

pub const DATASET_MAGIC: [u8; 8] = *b"PUFCRP1\0";
pub const MODEL_MAGIC: [u8; 8] = *b"PUFMDL1\0";

const HEADER_LEN: usize = 26;
const FLAG_REPEATS: u8 = 1;
const FLAG_TRIPLE: u8 = 2;

fn pack_bits<'a>(bits: impl Iterator<Item = &'a u8>, out: &mut Vec<u8>, len: usize) {
    let start = out.len();
    out.resize(start + len.div_ceil(8), 0);
    for (i, &b) in bits.enumerate() {
        out[start + i / 8] |= b << (i % 8);
    }
}

fn unpack_bits(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

pub fn write_dataset<W: Write>(d: &CrpDataset, sink: &mut W) -> Result<()> {
    let per = d.kind().challenges_per_record(d.k());
    let mut buf = Vec::with_capacity(HEADER_LEN + d.len() * (per * d.n() / 8 + 2));
    buf.extend_from_slice(&DATASET_MAGIC);
    buf.push(d.kind().code());
    buf.push(d.k() as u8);
    buf.extend_from_slice(&(d.n() as u16).to_le_bytes());
    let mut flags = 0;
    if d.has_repeats() {
        flags |= FLAG_REPEATS;
    }
    if d.has_triple() {
        flags |= FLAG_TRIPLE;
    }
    buf.push(flags);
    buf.push(0);
    buf.extend_from_slice(&d.repeats().to_le_bytes());
    buf.extend_from_slice(&(d.len() as u64).to_le_bytes());
    for r in d.records() {
        pack_bits(r.challenges.iter().flat_map(|c| c.bits()), &mut buf, per * d.n());
        let triple = r.triple.map_or(0, |t| t.pack());
        buf.push(r.response | triple << 1);
        if let Some(rep) = &r.repeats {
            pack_bits(rep.iter(), &mut buf, rep.len());
        }
    }
    sink.write_all(&buf)?;
    Ok(())
}

fn check_magic(bytes: &[u8], magic: &[u8; 8]) -> Result<(), DecodeError> {
    let n = bytes.len().min(8);
    if bytes[..n] != magic[..n] {
        let looks_versioned = n == 8 && bytes[..6] == magic[..6] && bytes[7] == 0 && bytes[6].is_ascii_digit();
        return Err(if looks_versioned {
            DecodeError::VersionMismatch { found: bytes[6] - b'0' }
        } else {
            DecodeError::BadMagic
        });
    }
    if n < 8 {
        return Err(DecodeError::Truncated { what: "header" });
    }
    Ok(())
}

pub fn read_dataset<R: Read>(source: &mut R) -> Result<CrpDataset> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    check_magic(&bytes, &DATASET_MAGIC)?;
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated { what: "header" }.into());
    }
    let kind = PufKind::from_code(bytes[8])
        .ok_or_else(|| DecodeError::Header(format!("unknown PUF kind {}", bytes[8])))?;
    let k = bytes[9] as usize;
    let n = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
    let flags = bytes[12];
    let repeats = u32::from_le_bytes(bytes[14..18].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    if flags & !(FLAG_REPEATS | FLAG_TRIPLE) != 0 {
        return Err(DecodeError::Header(format!("unknown flags {flags:#04x}")).into());
    }
    let has_repeats = flags & FLAG_REPEATS != 0;
    if has_repeats != (repeats > 0) {
        return Err(DecodeError::Header("repeat flag disagrees with repeat count".into()).into());
    }
    let has_triple = flags & FLAG_TRIPLE != 0;
    if k == 0 || n == 0 {
        return Err(DecodeError::Header(format!("k = {k}, n = {n}")).into());
    }
    let per = kind.challenges_per_record(k);
    let challenge_bytes = (per * n).div_ceil(8);
    let repeat_bytes = if has_repeats { (repeats as usize).div_ceil(8) } else { 0 };
    let rec_len = challenge_bytes + 1 + repeat_bytes;
    let body = &bytes[HEADER_LEN..];
    if body.len() % rec_len != 0 {
        return Err(DecodeError::Truncated { what: "record" }.into());
    }
    let actual = (body.len() / rec_len) as u64;
    if actual != count {
        return Err(DecodeError::CountMismatch { header: count, actual }.into());
    }
    let mut records = Vec::with_capacity(count as usize);
    for raw in body.chunks_exact(rec_len) {
        let bits = unpack_bits(&raw[..challenge_bytes], per * n);
        let challenges = bits
            .chunks(n)
            .map(|c| Challenge::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let resp = raw[challenge_bytes];
        let triple = has_triple.then(|| TripleResponse::unpack(resp >> 1));
        let reps = has_repeats.then(|| unpack_bits(&raw[challenge_bytes + 1..], repeats as usize));
        records.push(CrpRecord { challenges, response: resp & 1, repeats: reps, triple });
    }
    CrpDataset::new(kind, k, n, repeats, has_triple, records)
        .map_err(|e| PufError::Decode(DecodeError::Header(e.to_string())))
}

/// One line per record: challenge bit strings (stage 1 first), response,
/// then the triple and repeat bit strings when present.
pub fn write_dataset_csv<W: Write>(d: &CrpDataset, sink: &mut W) -> Result<()> {
    let per = d.kind().challenges_per_record(d.k());
    let mut header: Vec<String> = (0..per).map(|j| format!("comp{j}")).collect();
    header.push("response".into());
    if d.has_triple() {
        header.push("triple".into());
    }
    if d.has_repeats() {
        header.push("repeats".into());
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    let bitstr = |bits: &[u8]| bits.iter().map(|&b| char::from(b'0' + b)).collect::<String>();
    for r in d.records() {
        let mut cols: Vec<String> = r.challenges.iter().map(|c| bitstr(c.bits())).collect();
        cols.push(r.response.to_string());
        if let Some(t) = r.triple {
            cols.push(bitstr(&[t.r1, t.r2, t.r3]));
        }
        if let Some(rep) = &r.repeats {
            cols.push(bitstr(rep));
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    sink.write_all(out.as_bytes())?;
    Ok(())
}

// Instance file: magic `PUFMDL1\0`, u8 kind, u8 k, u16 n, u8 gate kind
// (0 NOT, 1 AND), u8 reserved, u32 gate count, f64 gate delay, then per
// component n f64 weights, f64 bias, f64 noise sigma.

pub fn write_model<W: Write>(design: &DesignSpec, model: &PufModel, sink: &mut W) -> Result<()> {
    if design.kind != model.kind() || design.k != model.k() || design.n != model.n() {
        return Err(PufError::input("model does not match its design"));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(&MODEL_MAGIC);
    buf.push(design.kind.code());
    buf.push(design.k as u8);
    buf.extend_from_slice(&(design.n as u16).to_le_bytes());
    buf.push(match design.module.gate_kind {
        GateKind::Not => 0,
        GateKind::And => 1,
    });
    buf.push(0);
    buf.extend_from_slice(&design.module.gate_count.to_le_bytes());
    buf.extend_from_slice(&design.module.gate_delay.to_le_bytes());
    for c in model.components() {
        for w in c.weights() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        buf.extend_from_slice(&c.bias().to_le_bytes());
        buf.extend_from_slice(&c.noise_sigma().to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_model<R: Read>(source: &mut R) -> Result<(DesignSpec, PufModel)> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    check_magic(&bytes, &MODEL_MAGIC)?;
    const HEAD: usize = 26;
    if bytes.len() < HEAD {
        return Err(DecodeError::Truncated { what: "header" }.into());
    }
    let kind = PufKind::from_code(bytes[8])
        .ok_or_else(|| DecodeError::Header(format!("unknown PUF kind {}", bytes[8])))?;
    let k = bytes[9] as usize;
    let n = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
    let gate_kind = match bytes[12] {
        0 => GateKind::Not,
        1 => GateKind::And,
        other => return Err(DecodeError::Header(format!("unknown gate kind {other}")).into()),
    };
    let gate_count = u32::from_le_bytes(bytes[14..18].try_into().unwrap());
    let gate_delay = f64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let body = &bytes[HEAD..];
    let comp_len = (n + 2) * 8;
    if body.len() < k * comp_len {
        return Err(DecodeError::Truncated { what: "component" }.into());
    }
    if body.len() > k * comp_len {
        return Err(DecodeError::Header("trailing bytes after last component".into()).into());
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
    let components = body
        .chunks_exact(comp_len)
        .map(|raw| {
            let weights = raw[..n * 8].chunks_exact(8).map(f).collect();
            ArbiterModel::new(weights, f(&raw[n * 8..n * 8 + 8]), f(&raw[n * 8 + 8..]))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| DecodeError::Header(e.to_string()))?;
    let module = DelayModuleSpec { gate_kind, gate_count, gate_delay };
    let design = DesignSpec::new(kind, k, n, module).map_err(|e| DecodeError::Header(e.to_string()))?;
    let model = PufModel::new(kind, components).map_err(|e| DecodeError::Header(e.to_string()))?;
    Ok((design, model))
}

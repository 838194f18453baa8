//! Versioned little-endian container for per-span IF spectra and an optional
//! field, used to cache propagation results between CLI stages.
//!
//! Layout: magic `XPMIFDMP`, u32 version, u32 flags (bit 0: field present),
//! u64 grid size, f64 sample rate (GHz), u64 span count, then span-major
//! `f64` magnitudes, then `(re, im)` pairs of the field when present.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::link::IfStack;
use crate::error::{Error, Result};
use crate::field::{SampledField, Spectrum};

const MAGIC: &[u8; 8] = b"XPMIFDMP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub if_stack: IfStack,
    pub field: Option<SampledField>,
}

pub fn write_dump<W: Write>(mut w: W, dump: &Dump) -> Result<()> {
    let stack = &dump.if_stack;
    let n = stack.len();
    if let Some(f) = &dump.field {
        if f.len() != n {
            return Err(Error::Dump("field length differs from IF grid size".into()));
        }
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(dump.field.is_some() as u32).to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&stack.sample_rate_ghz().to_le_bytes())?;
    w.write_all(&(stack.num_spans() as u64).to_le_bytes())?;
    for s in &stack.per_span {
        for v in &s.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    if let Some(f) = &dump.field {
        for z in f.samples() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_dump<R: Read>(mut r: R) -> Result<Dump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let flags = read_u32(&mut r)?;
    let n = read_u64(&mut r)? as usize;
    let fs = read_f64(&mut r)?;
    let spans = read_u64(&mut r)? as usize;
    if n == 0 || spans == 0 || n > 1 << 28 || spans > 1 << 16 {
        return Err(Error::Dump(format!("implausible header: grid {n}, spans {spans}")));
    }
    let mut per_span = Vec::with_capacity(spans);
    for _ in 0..spans {
        let values = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        per_span.push(Spectrum::new(fs, values));
    }
    let field = if flags & 1 == 1 {
        let samples = (0..n)
            .map(|_| Ok(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        Some(SampledField::new(samples, fs)?)
    } else {
        None
    };
    Ok(Dump { if_stack: IfStack::new(per_span)?, field })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(vals in proptest::collection::vec(0.0f64..1.0, 16), spans in 1usize..4, with_field: bool) {
            let per_span = (0..spans).map(|k| Spectrum::new(8.0, vals.iter().map(|v| v * (k + 1) as f64).collect())).collect();
            let stack = IfStack::new(per_span).unwrap();
            let field = with_field.then(|| SampledField::new(vals.iter().map(|v| Complex64::new(*v, -v)).collect(), 8.0).unwrap());
            let dump = Dump { if_stack: stack, field };
            let mut bytes = Vec::new();
            write_dump(&mut bytes, &dump).unwrap();
            let back = read_dump(bytes.as_slice()).unwrap();
            prop_assert_eq!(back, dump);
        }
    }

    #[test]
    fn header_layout() {
        let stack = IfStack::new(vec![Spectrum::new(4.0, vec![0.0, 1.0])]).unwrap();
        let mut bytes = Vec::new();
        write_dump(&mut bytes, &Dump { if_stack: stack, field: None }).unwrap();
        assert_eq!(&bytes[..8], b"XPMIFDMP");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 4.0);
        assert_eq!(bytes.len(), 40 + 16);
        assert!(read_dump(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'Y';
        assert!(read_dump(bad.as_slice()).is_err());
    }
}

//! Binary model container.
//!
//! Layout (little-endian): the ASCII magic `NHEP-AE v1`, `d_in: u64`,
//! `d_hidden: u64`, then the eight weight tensors of [`ModelParams`] in
//! `TENSOR_NAMES` order, each row-major `f64`.

use std::io::{Read, Write};
use std::path::Path;

use super::params::ModelParams;
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8] = b"NHEP-AE v1";
const MAGIC_FAMILY: &[u8] = b"NHEP-AE v";
/// Upper bound on a dimension accepted by the loader.
const MAX_DIM: u64 = 1 << 16;

pub fn write_model<W: Write>(params: &ModelParams, mut out: W) -> Result<()> {
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&(params.d_in as u64).to_le_bytes())?;
    out.write_all(&(params.d_hidden as u64).to_le_bytes())?;
    for t in params.tensors() {
        for v in t {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < MODEL_MAGIC.len() || !bytes.starts_with(MAGIC_FAMILY) {
        return Err(Error::IncompatibleModel("missing NHEP-AE magic".into()));
    }
    if !bytes.starts_with(MODEL_MAGIC) {
        return Err(Error::IncompatibleModel("unsupported model version".into()));
    }
    let mut rest = &bytes[MODEL_MAGIC.len()..];
    let d_in = take_u64(&mut rest)?;
    let d_h = take_u64(&mut rest)?;
    if d_in == 0 || d_h == 0 || d_in > MAX_DIM || d_h > MAX_DIM {
        return Err(Error::parse(0, format!("invalid model dims ({d_in}, {d_h})")));
    }
    let (d_in, d_h) = (d_in as usize, d_h as usize);
    let lens = ModelParams::tensor_lens(d_in, d_h);
    let expected: usize = lens.iter().sum::<usize>() * 8;
    if rest.len() != expected {
        return Err(Error::parse(
            0,
            format!("model payload is {} bytes, expected {expected}", rest.len()),
        ));
    }
    let mut params = ModelParams::zeros(d_in, d_h);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            let (head, tail) = rest.split_at(8);
            *v = f64::from_le_bytes(head.try_into().unwrap());
            rest = tail;
        }
    }
    if !params.is_finite() {
        return Err(Error::parse(0, "model contains non-finite weights"));
    }
    Ok(params)
}

fn take_u64(rest: &mut &[u8]) -> Result<u64> {
    if rest.len() < 8 {
        return Err(Error::parse(0, "truncated model header"));
    }
    let (head, tail) = rest.split_at(8);
    *rest = tail;
    Ok(u64::from_le_bytes(head.try_into().unwrap()))
}

pub fn write_model_file(params: &ModelParams, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_model(params, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::init_params;

    #[test]
    fn roundtrip_is_exact() {
        let p = init_params(3, 5, 2);
        let mut buf = Vec::new();
        write_model(&p, &mut buf).unwrap();
        assert!(buf.starts_with(b"NHEP-AE v1"));
        assert_eq!(&buf[10..18], &3u64.to_le_bytes());
        assert_eq!(read_model(&buf).unwrap(), p);
        let mut again = Vec::new();
        write_model(&read_model(&buf).unwrap(), &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_other_versions_and_garbage() {
        let p = init_params(2, 2, 2);
        let mut buf = Vec::new();
        write_model(&p, &mut buf).unwrap();
        let mut v2 = buf.clone();
        v2[9] = b'2';
        assert!(matches!(read_model(&v2), Err(Error::IncompatibleModel(_))));
        assert!(matches!(read_model(b"hello"), Err(Error::IncompatibleModel(_))));
        assert!(matches!(read_model(&buf[..buf.len() - 1]), Err(Error::Parse { .. })));
        let mut huge = MODEL_MAGIC.to_vec();
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_model(&huge).is_err());
    }
}

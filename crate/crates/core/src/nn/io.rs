//! Flat binary checkpoint format for [`ModelParams`].
//!
//! `"DPMP"`, version byte, architecture tag (`1` CNN, `2` MLP followed by
//! `inputs, hidden, classes` as `u32`), layer count (`u32`), then per layer
//! its name, shape and little-endian `f32` values.

use std::path::Path;

use crate::codec::{read_file, write_atomic, Reader, Writer};
use crate::error::Result;
use crate::nn::{Architecture, Layer, ModelParams};

const MAGIC: &[u8; 4] = b"DPMP";

pub fn encode(model: &ModelParams) -> Vec<u8> {
    let mut w = Writer::new(MAGIC);
    write_architecture(&mut w, model.architecture());
    w.u32(model.layers().len() as u32);
    for layer in model.layers() {
        w.str(&layer.name);
        w.tensor(&layer.tensor);
    }
    w.finish()
}

pub(crate) fn write_architecture(w: &mut Writer, arch: Architecture) {
    match arch {
        Architecture::PaperCnn => w.u8(1),
        Architecture::ToyMlp {
            inputs,
            hidden,
            classes,
        } => {
            w.u8(2);
            w.u32(inputs as u32);
            w.u32(hidden as u32);
            w.u32(classes as u32);
        }
    }
}

pub(crate) fn read_architecture(r: &mut Reader<'_>) -> Result<Architecture> {
    match r.u8()? {
        1 => Ok(Architecture::PaperCnn),
        2 => Ok(Architecture::ToyMlp {
            inputs: r.u32()? as usize,
            hidden: r.u32()? as usize,
            classes: r.u32()? as usize,
        }),
        other => Err(r.error(format!("unknown architecture tag {other}"))),
    }
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<ModelParams> {
    let mut r = Reader::open(bytes, MAGIC, origin)?;
    let arch = read_architecture(&mut r)?;
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.str()?;
        let tensor = r.tensor()?;
        layers.push(Layer { name, tensor });
    }
    let model = ModelParams::new(arch, layers).map_err(|e| r.error(e.to_string()))?;
    r.finish()?;
    Ok(model)
}

pub fn save(model: &ModelParams, path: &Path) -> Result<()> {
    write_atomic(path, &encode(model))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_preserves_bits(seed in any::<u64>(), hidden in 1usize..9) {
            let arch = Architecture::ToyMlp { inputs: 3, hidden, classes: 4 };
            let m = init_params(arch, seed).unwrap();
            let back = decode(&encode(&m), Path::new("mem")).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn header_layout() {
        let arch = Architecture::ToyMlp {
            inputs: 1,
            hidden: 1,
            classes: 2,
        };
        let bytes = encode(&ModelParams::zeros(arch).unwrap());
        assert_eq!(&bytes[..4], b"DPMP");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 2);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 4);
        assert!(decode(&bytes[..bytes.len() - 1], Path::new("mem")).is_err());
    }
}

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{AutogradError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    shape: Vec<usize>,
    value: Tensor,
    pub frozen: bool,
}

impl Param {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Empty for parameters of a symbolic store.
    pub fn value(&self) -> &Tensor {
        &self.value
    }
}

/// Named parameter arrays. A symbolic store records shapes without
/// allocating, which is how full-size variants are counted and probed.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    symbolic: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symbolic() -> Self {
        ParamStore {
            params: Vec::new(),
            symbolic: true,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.symbolic
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn push(&mut self, name: String, shape: &[usize], value: Tensor) -> ParamId {
        self.params.push(Param {
            name,
            shape: shape.to_vec(),
            value,
            frozen: false,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let shape = value.shape().to_vec();
        let value = if self.symbolic {
            Tensor::zeros(&[0])
        } else {
            value
        };
        self.push(name.into(), &shape, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let value = if self.symbolic {
            Tensor::zeros(&[0])
        } else {
            Tensor::zeros(shape)
        };
        self.push(name.into(), shape, value)
    }

    /// He-style uniform init, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
    pub fn add_he_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        self.add_uniform(name, shape, (6.0 / fan_in.max(1) as f64).sqrt(), rng)
    }

    /// U(-bound, bound) init.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> ParamId {
        if self.symbolic {
            return self.push(name.into(), shape, Tensor::zeros(&[0]));
        }
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        let value = Tensor::from_vec(shape, data).expect("shape product matches");
        self.push(name.into(), shape, value)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> Result<&Tensor> {
        if self.symbolic {
            return Err(AutogradError::Symbolic(self.params[id.0].name.clone()));
        }
        Ok(&self.params[id.0].value)
    }

    pub fn value_mut(&mut self, id: ParamId) -> Result<&mut Tensor> {
        if self.symbolic {
            return Err(AutogradError::Symbolic(self.params[id.0].name.clone()));
        }
        Ok(&mut self.params[id.0].value)
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if value.shape() != p.shape.as_slice() {
            return Err(crate::error::shape_err(
                "set_value",
                format!("{} expects {:?}, got {:?}", p.name, p.shape, value.shape()),
            ));
        }
        p.value = value;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.params[id.0].frozen = frozen;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.params[id.0].frozen
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(Param::numel).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| !p.frozen)
            .map(Param::numel)
            .sum()
    }

    pub fn count_where(&self, pred: impl Fn(&Param) -> bool) -> usize {
        self.params
            .iter()
            .filter(|p| pred(p))
            .map(Param::numel)
            .sum()
    }

    /// Serializes every parameter: u32 count, then per parameter
    /// `u32 name_len | name | u8 frozen | u32 ndim | u64 dims.. | f64 data..`,
    /// all little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.symbolic {
            return Err(AutogradError::InvalidArgument(
                "cannot serialize a symbolic parameter store".into(),
            ));
        }
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&(p.name.len() as u32).to_le_bytes())?;
            w.write_all(p.name.as_bytes())?;
            w.write_all(&[p.frozen as u8])?;
            w.write_all(&(p.shape.len() as u32).to_le_bytes())?;
            for &d in &p.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(p.value.numel() * 8);
            for v in p.value.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut rd = CountingReader { inner: r, offset: 0 };
        let n = rd.u32()? as usize;
        let mut store = ParamStore::new();
        for _ in 0..n {
            let name_len = rd.u32()? as usize;
            if name_len > 4096 {
                return Err(rd.err("parameter name length exceeds 4096"));
            }
            let name = String::from_utf8(rd.bytes(name_len)?)
                .map_err(|_| rd.err("parameter name is not UTF-8"))?;
            let frozen = match rd.bytes(1)?[0] {
                0 => false,
                1 => true,
                _ => return Err(rd.err("frozen flag must be 0 or 1")),
            };
            let ndim = rd.u32()? as usize;
            if ndim > 8 {
                return Err(rd.err("more than 8 dimensions"));
            }
            let mut shape = Vec::with_capacity(ndim);
            let mut numel: u64 = 1;
            for _ in 0..ndim {
                let d = rd.u64()?;
                numel = numel
                    .checked_mul(d)
                    .filter(|&v| v <= (1 << 34))
                    .ok_or_else(|| rd.err("dimension overflow"))?;
                shape.push(d as usize);
            }
            let raw = rd.bytes(numel as usize * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let id = store.add(name, Tensor::from_vec(&shape, data)?);
            store.set_frozen(id, frozen);
        }
        Ok(store)
    }
}

struct CountingReader<'a, R: Read> {
    inner: &'a mut R,
    offset: u64,
}

impl<R: Read> CountingReader<'_, R> {
    fn err(&self, msg: &str) -> AutogradError {
        AutogradError::Format {
            offset: self.offset,
            msg: msg.to_string(),
        }
    }

    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                self.err(&format!("truncated, wanted {n} more bytes"))
            } else {
                AutogradError::Io(e)
            }
        })?;
        self.offset += n as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

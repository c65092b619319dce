//! Self-describing binary checkpoint container.
//!
//! Layout (all integers little-endian, floats IEEE-754 binary64 LE):
//!
//! ```text
//!   magic    4 bytes  "MEMB"
//!   version  u32      currently 1
//!   kind     u8       0 = varembed, 1 = additive
//!   rec      u8       0 = rnn, 1 = lstm
//!   k,h      u32 each
//!   v_w,v_m  u32 each
//!   epoch    u32
//!   lr,rho,eps  f64 each           (optimizer hyperparameters)
//!   vocab    v_w x { str, u64 }    (word, count)
//!   seg      v_m x str             (morpheme surface forms)
//!            v_w x { u16 n, n x u32 }  (per-word morpheme ids)
//!   nparams  u32
//!   params   nparams x { str name, u32 rows, u32 cols, rows*cols f64 }
//!   accs     nparams x { u32 rows, u32 cols, rows*cols f64 }
//!            (RMSProp accumulators, aligned with params)
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8 bytes. Serialization is
//! deterministic, so identical models produce identical bytes.

use std::fs;
use std::path::Path;

use crate::corpus::{write_atomic, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::graph::{ParamId, ParamSet};
use crate::numerics::optim::RmsProp;
use crate::numerics::tensor::Tensor;
use crate::segment::SegmentationTable;

use super::{ModelDims, ModelKind, ModelParams, RecParams, RecurrenceKind};

const MAGIC: &[u8; 4] = b"MEMB";
const VERSION: u32 = 1;

/// A trained model with everything needed to evaluate or resume it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub vocab: Vocabulary,
    pub seg: SegmentationTable,
    pub optimizer: RmsProp,
    pub epoch: u32,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        out.push(match self.model.kind {
            ModelKind::Varembed => 0,
            ModelKind::Additive => 1,
        });
        out.push(match self.model.recurrence {
            RecurrenceKind::Rnn => 0,
            RecurrenceKind::Lstm => 1,
        });
        let d = self.model.dims;
        for v in [d.k, d.h, d.v_w, d.v_m] {
            put_u32(&mut out, v as u32);
        }
        put_u32(&mut out, self.epoch);
        for v in [self.optimizer.lr, self.optimizer.rho, self.optimizer.eps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for id in 0..self.vocab.size() {
            put_str(&mut out, self.vocab.surface(id));
            out.extend_from_slice(&self.vocab.count(id).to_le_bytes());
        }
        for m in self.seg.morphemes() {
            put_str(&mut out, m);
        }
        for list in self.seg.analyses() {
            out.extend_from_slice(&(list.len() as u16).to_le_bytes());
            for &m in list {
                put_u32(&mut out, m as u32);
            }
        }
        put_u32(&mut out, self.model.set.len() as u32);
        for id in self.model.set.ids() {
            put_str(&mut out, self.model.set.name(id));
            put_tensor(&mut out, self.model.set.get(id));
        }
        for acc in self.optimizer.accumulators() {
            put_tensor_unnamed(&mut out, acc);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = match r.u8()? {
            0 => ModelKind::Varembed,
            1 => ModelKind::Additive,
            other => return Err(Error::Checkpoint(format!("unknown model kind {other}"))),
        };
        let recurrence = match r.u8()? {
            0 => RecurrenceKind::Rnn,
            1 => RecurrenceKind::Lstm,
            other => return Err(Error::Checkpoint(format!("unknown recurrence {other}"))),
        };
        let k = r.u32()? as usize;
        let h = r.u32()? as usize;
        let v_w = r.u32()? as usize;
        let v_m = r.u32()? as usize;
        let dims = ModelDims { k, h, v_w, v_m };
        r.check_dims(&dims)?;
        let epoch = r.u32()?;
        let lr = r.f64()?;
        let rho = r.f64()?;
        let eps = r.f64()?;
        if !(lr.is_finite() && rho.is_finite() && eps.is_finite()) {
            return Err(Error::Checkpoint("non-finite optimizer settings".into()));
        }

        let mut words = Vec::with_capacity(v_w);
        let mut counts = Vec::with_capacity(v_w);
        for _ in 0..v_w {
            words.push(r.string()?);
            counts.push(r.u64()?);
        }
        let vocab = Vocabulary::from_parts(words, counts)?;

        let mut morphemes = Vec::with_capacity(v_m);
        for _ in 0..v_m {
            morphemes.push(r.string()?);
        }
        let mut per_word = Vec::with_capacity(v_w);
        for _ in 0..v_w {
            let n = r.u16()? as usize;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                list.push(r.u32()? as usize);
            }
            per_word.push(list);
        }
        let seg = SegmentationTable::from_parts(morphemes, per_word)?;

        let nparams = r.u32()? as usize;
        let expected = match recurrence {
            RecurrenceKind::Rnn => 6,
            RecurrenceKind::Lstm => 15,
        };
        if nparams != expected {
            return Err(Error::Checkpoint(format!(
                "{nparams} parameters, expected {expected}"
            )));
        }
        let mut set = ParamSet::new();
        let mut names = Vec::with_capacity(nparams);
        for _ in 0..nparams {
            let name = r.string()?;
            let t = r.tensor()?;
            if names.contains(&name) {
                return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
            }
            names.push(name.clone());
            set.add(&name, t);
        }
        let mut accs = Vec::with_capacity(nparams);
        for i in 0..nparams {
            let t = r.tensor()?;
            let p = set.get(ParamId(i));
            if t.rows() != p.rows() || t.cols() != p.cols() {
                return Err(Error::Checkpoint(format!("accumulator {i} shape mismatch")));
            }
            accs.push(t);
        }
        if r.pos != r.bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }

        let need = |set: &ParamSet, name: &str| -> Result<ParamId> {
            set.find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
        };
        let input_table = need(&set, "input_table")?;
        let morph_table = need(&set, "morph_table")?;
        let output = need(&set, "output_v")?;
        let rec = match recurrence {
            RecurrenceKind::Rnn => RecParams::Rnn {
                w_in: need(&set, "rnn_w_in")?,
                w_rec: need(&set, "rnn_w_rec")?,
                bias: need(&set, "rnn_bias")?,
            },
            RecurrenceKind::Lstm => {
                let gate = |set: &ParamSet, prefix: &str| -> Result<[ParamId; 4]> {
                    let mut out = [ParamId(0); 4];
                    for (i, g) in ["i", "f", "o", "g"].iter().enumerate() {
                        out[i] = need(set, &format!("{prefix}{g}"))?;
                    }
                    Ok(out)
                };
                RecParams::Lstm {
                    w: gate(&set, "lstm_w_")?,
                    u: gate(&set, "lstm_u_")?,
                    b: gate(&set, "lstm_b_")?,
                }
            }
        };
        let shapes = [
            (input_table, v_w, k),
            (morph_table, v_m, k),
            (output, v_w, h),
        ];
        for (id, rows, cols) in shapes {
            let t = set.get(id);
            if t.rows() != rows || t.cols() != cols {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {}x{}, expected {rows}x{cols}",
                    set.name(id),
                    t.rows(),
                    t.cols()
                )));
            }
            if !t.is_finite() {
                return Err(Error::Checkpoint(format!(
                    "non-finite values in {}",
                    set.name(id)
                )));
            }
        }

        let model = ModelParams {
            kind,
            recurrence,
            dims,
            set,
            input_table,
            morph_table,
            output,
            rec,
            morph_lists: seg.analyses().to_vec(),
        };
        let optimizer = RmsProp::restore(lr, rho, eps, accs);
        Ok(Checkpoint {
            model,
            vocab,
            seg,
            optimizer,
            epoch,
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    put_tensor_unnamed(out, t);
}

fn put_tensor_unnamed(out: &mut Vec<u8>, t: &Tensor) {
    put_u32(out, t.rows() as u32);
    put_u32(out, t.cols() as u32);
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        if n > 1 << 20 {
            return Err(Error::Checkpoint(format!("string of {n} bytes")));
        }
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Checkpoint("invalid utf-8".into()))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint("tensor shape overflow".into()))?;
        if n > self.bytes.len() / 8 + 1 {
            return Err(Error::Checkpoint("tensor larger than file".into()));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(self.f64()?);
        }
        Ok(Tensor::from_vec(rows, cols, data))
    }

    fn check_dims(&self, dims: &ModelDims) -> Result<()> {
        // coarse bound so hostile headers cannot request huge allocations
        let bound = 1usize << 26;
        for (name, v) in [
            ("k", dims.k),
            ("h", dims.h),
            ("v_w", dims.v_w),
            ("v_m", dims.v_m),
        ] {
            if v == 0 || v > bound {
                return Err(Error::Checkpoint(format!("implausible {name} = {v}")));
            }
        }
        if dims.v_w.saturating_mul(dims.k) > self.bytes.len() {
            return Err(Error::Checkpoint("dims exceed file size".into()));
        }
        Ok(())
    }
}

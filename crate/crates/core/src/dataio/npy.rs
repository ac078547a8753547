//! Two-dimensional NPY v1.0 files, little-endian, C order.
//!
//! Headers are laid out exactly as `numpy.save` writes them (sorted keys,
//! axis-growth spare space, 64-byte alignment), so files are byte-identical
//! to NumPy's output for the same array.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ARRAY_ALIGN: usize = 64;
const GROWTH_AXIS_MAX_DIGITS: usize = 21;
/// Magic, version and the 2-byte header length.
const PREAMBLE_LEN: usize = 10;

/// Element storage of a 2-D array.
#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    U16(Vec<u16>),
    U32(Vec<u32>),
}

impl NpyData {
    pub fn descr(&self) -> &'static str {
        match self {
            NpyData::F32(_) => "<f4",
            NpyData::U16(_) => "<u2",
            NpyData::U32(_) => "<u4",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NpyData::F32(v) => v.len(),
            NpyData::U16(v) => v.len(),
            NpyData::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn item_size(descr: &str) -> Option<usize> {
        match descr {
            "<f4" | "<u4" => Some(4),
            "<u2" => Some(2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub height: usize,
    pub width: usize,
    pub data: NpyData,
}

impl NpyArray {
    pub fn new(height: usize, width: usize, data: NpyData) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "{} elements do not fill a {height}x{width} array",
                data.len()
            )));
        }
        Ok(NpyArray { height, width, data })
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            NpyData::F32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u16(&self) -> Option<&[u16]> {
        match &self.data {
            NpyData::U16(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u32(&self) -> Option<&[u32]> {
        match &self.data {
            NpyData::U32(v) => Some(v),
            _ => None,
        }
    }
}

/// Header text including the trailing padding and newline.
fn header_text(descr: &str, height: usize, width: usize) -> String {
    let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': ({height}, {width}), }}");
    header.push_str(&" ".repeat(GROWTH_AXIS_MAX_DIGITS.saturating_sub(height.to_string().len())));
    let hlen = header.len() + 1;
    let padlen = ARRAY_ALIGN - ((PREAMBLE_LEN + hlen) % ARRAY_ALIGN);
    header.push_str(&" ".repeat(padlen));
    header.push('\n');
    header
}

pub fn encode(arr: &NpyArray) -> Vec<u8> {
    let header = header_text(arr.data.descr(), arr.height, arr.width);
    let item = NpyData::item_size(arr.data.descr()).expect("supported dtype");
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + arr.data.len() * item);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &arr.data {
        NpyData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

/// Parsed header fields.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyHeader {
    pub descr: String,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
    /// Byte offset of the payload.
    pub data_offset: usize,
}

/// Minimal parser for the Python dict literal NumPy writes.
struct DictParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> DictParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Option<String> {
        self.skip_ws();
        let q = *self.s.get(self.pos)?;
        if q != b'\'' && q != b'"' {
            return None;
        }
        let start = self.pos + 1;
        let end = start + self.s[start..].iter().position(|&c| c == q)?;
        self.pos = end + 1;
        String::from_utf8(self.s[start..end].to_vec()).ok()
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok().filter(|x| !x.is_empty())
    }

    fn tuple(&mut self) -> Option<Vec<usize>> {
        if !self.eat(b'(') {
            return None;
        }
        let mut dims = Vec::new();
        loop {
            if self.eat(b')') {
                return Some(dims);
            }
            dims.push(self.ident()?.parse().ok()?);
            if !self.eat(b',') {
                return self.eat(b')').then_some(dims);
            }
        }
    }
}

pub fn parse_header(bytes: &[u8], path: &Path) -> Result<NpyHeader> {
    if bytes.len() < PREAMBLE_LEN || &bytes[..6] != MAGIC {
        return Err(Error::format(path, Some(0), "magic: not an NPY file"));
    }
    if bytes[6..8] != [1, 0] {
        return Err(Error::format(
            path,
            Some(6),
            format!("version: {}.{} is not supported (only 1.0)", bytes[6], bytes[7]),
        ));
    }
    let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_offset = PREAMBLE_LEN + hlen;
    if bytes.len() < data_offset {
        return Err(Error::format(path, Some(8), "header: truncated"));
    }
    let text = &bytes[PREAMBLE_LEN..data_offset];
    let mut p = DictParser { s: text, pos: 0 };
    let bad = |what: &str, p: &DictParser| Error::format(path, Some((PREAMBLE_LEN + p.pos) as u64), format!("header: {what}"));
    if !p.eat(b'{') {
        return Err(bad("expected '{'", &p));
    }
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    loop {
        if p.eat(b'}') {
            break;
        }
        let key = p.string().ok_or_else(|| bad("expected key", &p))?;
        if !p.eat(b':') {
            return Err(bad("expected ':'", &p));
        }
        match key.as_str() {
            "descr" => descr = Some(p.string().ok_or_else(|| bad("descr must be a string", &p))?),
            "fortran_order" => {
                fortran = Some(match p.ident() {
                    Some("False") => false,
                    Some("True") => true,
                    _ => return Err(bad("fortran_order must be True or False", &p)),
                })
            }
            "shape" => shape = Some(p.tuple().ok_or_else(|| bad("shape must be a tuple of integers", &p))?),
            other => return Err(bad(&format!("unexpected key '{other}'"), &p)),
        }
        if !p.eat(b',') {
            if p.eat(b'}') {
                break;
            }
            return Err(bad("expected ',' or '}'", &p));
        }
    }
    Ok(NpyHeader {
        descr: descr.ok_or_else(|| Error::format(path, Some(PREAMBLE_LEN as u64), "descr: missing"))?,
        fortran_order: fortran.ok_or_else(|| Error::format(path, Some(PREAMBLE_LEN as u64), "fortran_order: missing"))?,
        shape: shape.ok_or_else(|| Error::format(path, Some(PREAMBLE_LEN as u64), "shape: missing"))?,
        data_offset,
    })
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<NpyArray> {
    let h = parse_header(bytes, path)?;
    let item = NpyData::item_size(&h.descr).ok_or_else(|| {
        Error::format(path, Some(PREAMBLE_LEN as u64), format!("descr: unsupported dtype '{}'", h.descr))
    })?;
    if h.fortran_order {
        return Err(Error::format(path, Some(PREAMBLE_LEN as u64), "fortran_order: True is not supported"));
    }
    let [height, width] = h.shape[..] else {
        return Err(Error::format(
            path,
            Some(PREAMBLE_LEN as u64),
            format!("shape: expected 2 dimensions, got {:?}", h.shape),
        ));
    };
    let payload = &bytes[h.data_offset..];
    let expected = height * width * item;
    if payload.len() != expected {
        return Err(Error::format(
            path,
            Some((h.data_offset + payload.len().min(expected)) as u64),
            format!("payload: expected {expected} bytes for shape ({height}, {width}), found {}", payload.len()),
        ));
    }
    let data = match h.descr.as_str() {
        "<f4" => NpyData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
        "<u4" => NpyData::U32(payload.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()),
        "<u2" => NpyData::U16(payload.chunks_exact(2).map(|c| u16::from_le_bytes(c.try_into().unwrap())).collect()),
        _ => unreachable!("item size checked above"),
    };
    Ok(NpyArray { height, width, data })
}

pub fn write_npy(path: &Path, arr: &NpyArray) -> Result<()> {
    super::atomic_write(path, &encode(arr))
}

pub fn read_npy(path: &Path) -> Result<NpyArray> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Reads only the header; used by validation passes.
pub fn read_npy_header(path: &Path) -> Result<NpyHeader> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pre = [0u8; PREAMBLE_LEN];
    f.read_exact(&mut pre).map_err(|_| Error::format(path, Some(0), "magic: file too short"))?;
    let hlen = u16::from_le_bytes([pre[8], pre[9]]) as usize;
    let mut buf = pre.to_vec();
    buf.resize(PREAMBLE_LEN + hlen, 0);
    f.read_exact(&mut buf[PREAMBLE_LEN..]).map_err(|_| Error::format(path, Some(8), "header: truncated"))?;
    parse_header(&buf, path)
}

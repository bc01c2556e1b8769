//! Reading and writing the `.npy` v1.0 container.
//!
//! Only C-order arrays of `f32`, `f64`, `u16` and `u8` are supported. Big- and
//! little-endian payloads are both accepted on read and normalized to native
//! values; the writer always emits little-endian data with the same header
//! layout numpy produces (dict repr padded with spaces so that the payload
//! starts on a 64-byte boundary).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
    U16,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U16 => 2,
            Dtype::U8 => 1,
        }
    }

    fn canonical_descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
            Dtype::U16 => "<u2",
            Dtype::U8 => "|u1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub dtype: Dtype,
    big_endian: bool,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
    /// Byte offset of the payload from the start of the file.
    pub data_offset: usize,
}

impl Header {
    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Typed payload of an `.npy` file, always in native byte order.
#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U16(Vec<u16>),
    U8(Vec<u8>),
}

impl NpyData {
    pub fn dtype(&self) -> Dtype {
        match self {
            NpyData::F32(_) => Dtype::F32,
            NpyData::F64(_) => Dtype::F64,
            NpyData::U16(_) => Dtype::U16,
            NpyData::U8(_) => Dtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
            NpyData::U16(v) => v.len(),
            NpyData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Promotes every element to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            NpyData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            NpyData::F64(v) => v.clone(),
            NpyData::U16(v) => v.iter().map(|&x| f64::from(x)).collect(),
            NpyData::U8(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }
}

/// A raw array as stored on disk: shape plus typed, C-ordered payload.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: NpyData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {expected} elements, payload has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Parses the preamble and header dict. `path` is used for error messages only.
pub fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if bytes.len() < 10 || bytes[..6] != MAGIC {
        return Err(malformed(path, "missing \\x93NUMPY magic"));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(malformed(path, "truncated preamble"));
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
            (len as usize, 12)
        }
        _ => return Err(malformed(path, format!("unsupported version {major}.{minor}"))),
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(malformed(path, "header extends past end of file"));
    }
    let text = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| malformed(path, "header is not valid text"))?;
    let dict = dict::parse(text).map_err(|reason| malformed(path, reason))?;

    let (dtype, endian) = parse_descr(&dict.descr).ok_or_else(|| Error::UnsupportedDtype {
        path: path.to_path_buf(),
        descr: dict.descr.clone(),
    })?;
    if dict.fortran_order {
        return Err(malformed(path, "fortran_order arrays are not supported"));
    }
    Ok(Header {
        dtype,
        big_endian: endian == Endian::Big,
        fortran_order: dict.fortran_order,
        shape: dict.shape,
        data_offset: end,
    })
}

fn parse_descr(descr: &str) -> Option<(Dtype, Endian)> {
    let mut chars = descr.chars();
    let order = chars.next()?;
    let rest = chars.as_str();
    let dtype = match rest {
        "f4" => Dtype::F32,
        "f8" => Dtype::F64,
        "u2" => Dtype::U16,
        "u1" => Dtype::U8,
        _ => return None,
    };
    let native = if cfg!(target_endian = "big") {
        Endian::Big
    } else {
        Endian::Little
    };
    let endian = match order {
        '<' => Endian::Little,
        '>' => Endian::Big,
        '=' => native,
        '|' if dtype == Dtype::U8 => Endian::Little,
        _ => return None,
    };
    Some((dtype, endian))
}

/// Decodes a complete `.npy` byte buffer.
pub fn decode(bytes: &[u8], path: &Path) -> Result<NpyArray> {
    let header = parse_header(bytes, path)?;
    let count = header.element_count();
    let payload = &bytes[header.data_offset..];
    let needed = count
        .checked_mul(header.dtype.size())
        .ok_or_else(|| malformed(path, "shape overflows"))?;
    if payload.len() != needed {
        return Err(malformed(
            path,
            format!(
                "payload is {} bytes, shape {:?} needs {needed}",
                payload.len(),
                header.shape
            ),
        ));
    }
    let big = header.big_endian;
    let data = match header.dtype {
        Dtype::F32 => NpyData::F32(
            payload
                .chunks_exact(4)
                .map(|c| {
                    let b = [c[0], c[1], c[2], c[3]];
                    if big {
                        f32::from_be_bytes(b)
                    } else {
                        f32::from_le_bytes(b)
                    }
                })
                .collect(),
        ),
        Dtype::F64 => NpyData::F64(
            payload
                .chunks_exact(8)
                .map(|c| {
                    let mut b = [0u8; 8];
                    b.copy_from_slice(c);
                    if big {
                        f64::from_be_bytes(b)
                    } else {
                        f64::from_le_bytes(b)
                    }
                })
                .collect(),
        ),
        Dtype::U16 => NpyData::U16(
            payload
                .chunks_exact(2)
                .map(|c| {
                    if big {
                        u16::from_be_bytes([c[0], c[1]])
                    } else {
                        u16::from_le_bytes([c[0], c[1]])
                    }
                })
                .collect(),
        ),
        Dtype::U8 => NpyData::U8(payload.to_vec()),
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

/// Encodes an array with a canonical v1.0 header and little-endian payload.
pub fn encode(array: &NpyArray) -> Vec<u8> {
    let mut dict = String::new();
    let _ = write!(
        dict,
        "{{'descr': '{}', 'fortran_order': False, 'shape': (",
        array.data.dtype().canonical_descr()
    );
    for (i, d) in array.shape.iter().enumerate() {
        if i > 0 {
            dict.push_str(", ");
        }
        let _ = write!(dict, "{d}");
    }
    if array.shape.len() == 1 {
        dict.push(',');
    }
    dict.push_str("), }");

    // +1 for the trailing newline.
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + padding + 1;
    assert!(header_len <= u16::MAX as usize, "header too long for v1.0");

    let mut out = Vec::with_capacity(unpadded + padding + array.data.len() * array.data.dtype().size());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(out.len() + padding, b' ');
    out.push(b'\n');
    match &array.data {
        NpyData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::U8(v) => out.extend_from_slice(v),
    }
    out
}

pub fn read_file(path: &Path) -> Result<NpyArray> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Reads only as much of the file as needed to parse the header.
pub fn read_header_only(path: &Path) -> Result<Header> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; 12];
    let n = read_up_to(&mut file, &mut buf).map_err(|e| Error::io(path, e))?;
    buf.truncate(n);
    if n < 10 || buf[..6] != MAGIC {
        return Err(malformed(path, "missing \\x93NUMPY magic"));
    }
    let total = match buf[6] {
        1 => 10 + u16::from_le_bytes([buf[8], buf[9]]) as usize,
        2 | 3 if n == 12 => 12 + u32::from_le_bytes([buf[8], buf[9], buf[10], buf[11]]) as usize,
        _ => return parse_header(&buf, path),
    };
    if total > buf.len() {
        let mut rest = vec![0u8; total - buf.len()];
        let got = read_up_to(&mut file, &mut rest).map_err(|e| Error::io(path, e))?;
        rest.truncate(got);
        buf.extend_from_slice(&rest);
    }
    let mut header = parse_header(&buf, path)?;
    header.data_offset = total;
    Ok(header)
}

fn read_up_to(reader: &mut impl std::io::Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

pub fn write_file(path: &Path, array: &NpyArray) -> Result<()> {
    std::fs::write(path, encode(array)).map_err(|e| Error::io(path, e))
}

/// Minimal parser for the python-literal header dict.
mod dict {
    pub(super) struct HeaderDict {
        pub descr: String,
        pub fortran_order: bool,
        pub shape: Vec<usize>,
    }

    #[derive(Debug, PartialEq)]
    enum Value {
        Str(String),
        Bool(bool),
        Tuple(Vec<usize>),
    }

    struct Cursor<'a> {
        src: &'a [u8],
        pos: usize,
    }

    impl<'a> Cursor<'a> {
        fn skip_ws(&mut self) {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }

        fn peek(&mut self) -> Option<u8> {
            self.skip_ws();
            self.src.get(self.pos).copied()
        }

        fn expect(&mut self, c: u8) -> Result<(), String> {
            match self.peek() {
                Some(x) if x == c => {
                    self.pos += 1;
                    Ok(())
                }
                other => Err(format!(
                    "expected {:?} at byte {}, found {:?}",
                    c as char,
                    self.pos,
                    other.map(|b| b as char)
                )),
            }
        }

        fn string(&mut self) -> Result<String, String> {
            let quote = self.peek().ok_or("unexpected end of header")?;
            if quote != b'\'' && quote != b'"' {
                return Err(format!("expected string at byte {}", self.pos));
            }
            self.pos += 1;
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos] != quote {
                self.pos += 1;
            }
            if self.pos == self.src.len() {
                return Err("unterminated string".into());
            }
            let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
            self.pos += 1;
            Ok(s)
        }

        fn ident(&mut self) -> &'a [u8] {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            &self.src[start..self.pos]
        }

        fn value(&mut self) -> Result<Value, String> {
            match self.peek().ok_or("unexpected end of header")? {
                b'\'' | b'"' => self.string().map(Value::Str),
                b'(' => {
                    self.pos += 1;
                    let mut dims = Vec::new();
                    loop {
                        if self.peek() == Some(b')') {
                            self.pos += 1;
                            break;
                        }
                        let digits = self.ident();
                        let text = std::str::from_utf8(digits).unwrap_or("");
                        let text = text.strip_suffix('L').unwrap_or(text);
                        let dim = text
                            .parse::<usize>()
                            .map_err(|_| format!("bad shape entry {text:?}"))?;
                        dims.push(dim);
                        match self.peek() {
                            Some(b',') => self.pos += 1,
                            Some(b')') => {}
                            _ => return Err("malformed shape tuple".into()),
                        }
                    }
                    Ok(Value::Tuple(dims))
                }
                _ => match self.ident() {
                    b"True" => Ok(Value::Bool(true)),
                    b"False" => Ok(Value::Bool(false)),
                    other => Err(format!(
                        "unexpected token {:?}",
                        String::from_utf8_lossy(other)
                    )),
                },
            }
        }
    }

    pub(super) fn parse(text: &str) -> Result<HeaderDict, String> {
        let mut cur = Cursor {
            src: text.as_bytes(),
            pos: 0,
        };
        let (mut descr, mut fortran, mut shape) = (None, None, None);
        cur.expect(b'{')?;
        loop {
            if cur.peek() == Some(b'}') {
                cur.pos += 1;
                break;
            }
            let key = cur.string()?;
            cur.expect(b':')?;
            let value = cur.value()?;
            match (key.as_str(), value) {
                ("descr", Value::Str(s)) if descr.is_none() => descr = Some(s),
                ("fortran_order", Value::Bool(b)) if fortran.is_none() => fortran = Some(b),
                ("shape", Value::Tuple(t)) if shape.is_none() => shape = Some(t),
                (k, v) => return Err(format!("unexpected entry {k:?}: {v:?}")),
            }
            match cur.peek() {
                Some(b',') => cur.pos += 1,
                Some(b'}') => {}
                _ => return Err("expected ',' or '}' in header dict".into()),
            }
        }
        if cur.peek().is_some() {
            return Err("trailing bytes after header dict".into());
        }
        Ok(HeaderDict {
            descr: descr.ok_or("missing 'descr'")?,
            fortran_order: fortran.ok_or("missing 'fortran_order'")?,
            shape: shape.ok_or("missing 'shape'")?,
        })
    }
}

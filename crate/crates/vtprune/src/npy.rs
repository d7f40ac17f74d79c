//! Minimal reader and writer for the numpy `.npy` format.
//!
//! Reads versions 1.0 and 2.0 holding little-endian `f4`/`f8` data in C
//! order; everything is widened to `f64`. Writes version 1.0 `<f8` files with
//! the header padded to a 64-byte boundary, the same layout numpy produces.
//! See <https://numpy.org/doc/stable/reference/generated/numpy.lib.format.html>.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Error)]
pub enum NpyError {
    #[error("not an npy file (bad magic string)")]
    BadMagic,
    #[error("unsupported npy version {major}.{minor}")]
    UnsupportedVersion { major: u8, minor: u8 },
    #[error("npy header is truncated")]
    TruncatedHeader,
    #[error("malformed npy header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype {0:?} (expected '<f4' or '<f8')")]
    UnsupportedDtype(String),
    #[error("Fortran-ordered arrays are not supported")]
    FortranOrder,
    #[error("array has rank {found}, expected {expected}")]
    ShapeRank { found: usize, expected: &'static str },
    #[error("npy data is truncated: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl NpyError {
    pub fn name(&self) -> &'static str {
        match self {
            NpyError::BadMagic => "BadMagic",
            NpyError::UnsupportedVersion { .. } => "UnsupportedVersion",
            NpyError::TruncatedHeader => "TruncatedHeader",
            NpyError::MalformedHeader(_) => "MalformedHeader",
            NpyError::UnsupportedDtype(_) => "UnsupportedDtype",
            NpyError::FortranOrder => "FortranOrder",
            NpyError::ShapeRank { .. } => "ShapeRank",
            NpyError::TruncatedData { .. } => "TruncatedData",
            NpyError::NonFinite { .. } => "NonFinite",
            NpyError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F4,
    F8,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }

    fn parse(descr: &str) -> Result<Self, NpyError> {
        match descr {
            "<f4" => Ok(Dtype::F4),
            "<f8" => Ok(Dtype::F8),
            other => Err(NpyError::UnsupportedDtype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub version: (u8, u8),
    pub dtype: Dtype,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

/// A C-ordered array widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub source_dtype: Dtype,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data, source_dtype: Dtype::F8 }
    }
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], err: fn() -> NpyError) -> Result<(), NpyError> {
    r.read_exact(buf).map_err(|e| if e.kind() == io::ErrorKind::UnexpectedEof { err() } else { e.into() })
}

pub fn read_header<R: Read>(r: &mut R) -> Result<Header, NpyError> {
    let mut magic = [0u8; 6];
    read_exact_or(r, &mut magic, || NpyError::BadMagic)?;
    if &magic != MAGIC {
        return Err(NpyError::BadMagic);
    }
    let mut ver = [0u8; 2];
    read_exact_or(r, &mut ver, || NpyError::TruncatedHeader)?;
    let len = match ver {
        [1, 0] => {
            let mut b = [0u8; 2];
            read_exact_or(r, &mut b, || NpyError::TruncatedHeader)?;
            u16::from_le_bytes(b) as usize
        }
        [2, 0] => {
            let mut b = [0u8; 4];
            read_exact_or(r, &mut b, || NpyError::TruncatedHeader)?;
            u32::from_le_bytes(b) as usize
        }
        [major, minor] => return Err(NpyError::UnsupportedVersion { major, minor }),
    };
    let mut text = vec![0u8; len];
    read_exact_or(r, &mut text, || NpyError::TruncatedHeader)?;
    // latin-1 per the format; the dict itself is plain ASCII
    let text: String = text.iter().map(|&b| b as char).collect();

    let dict = match literal::parse(text.trim_end())? {
        literal::Value::Dict(d) => d,
        _ => return Err(NpyError::MalformedHeader("header is not a dict".into())),
    };
    let field = |key: &str| {
        dict.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| NpyError::MalformedHeader(format!("missing key '{key}'")))
    };
    let descr = match field("descr")? {
        literal::Value::Str(s) => s.clone(),
        _ => return Err(NpyError::UnsupportedDtype("<structured>".into())),
    };
    let fortran_order = match field("fortran_order")? {
        literal::Value::Bool(b) => *b,
        _ => return Err(NpyError::MalformedHeader("fortran_order is not a bool".into())),
    };
    let shape = match field("shape")? {
        literal::Value::Tuple(items) => items
            .iter()
            .map(|v| match v {
                literal::Value::Int(n) => Ok(*n),
                _ => Err(NpyError::MalformedHeader("shape entries must be integers".into())),
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(NpyError::MalformedHeader("shape is not a tuple".into())),
    };
    Ok(Header { version: (ver[0], ver[1]), dtype: Dtype::parse(&descr)?, fortran_order, shape })
}

pub fn read_array<R: Read>(r: &mut R) -> Result<NpyArray, NpyError> {
    let header = read_header(r)?;
    if header.fortran_order {
        return Err(NpyError::FortranOrder);
    }
    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| NpyError::MalformedHeader("shape overflows".into()))?;
    let expected =
        count.checked_mul(header.dtype.size()).ok_or_else(|| NpyError::MalformedHeader("shape overflows".into()))?;

    let mut bytes = Vec::with_capacity(expected.min(1 << 28));
    r.take(expected as u64).read_to_end(&mut bytes)?;
    if bytes.len() < expected {
        return Err(NpyError::TruncatedData { expected, found: bytes.len() });
    }
    let data: Vec<f64> = match header.dtype {
        Dtype::F4 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        Dtype::F8 => bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
    };
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(NpyError::NonFinite { index });
    }
    Ok(NpyArray { shape: header.shape, data, source_dtype: header.dtype })
}

fn header_text(shape: &[usize]) -> String {
    let dims = match shape {
        [one] => format!("({one},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    format!("{{'descr': '<f8', 'fortran_order': False, 'shape': {dims}, }}")
}

/// Writes `data` with the given shape as a version 1.0 `<f8` array (2.0 if
/// the header would not fit a 16-bit length).
pub fn write_array<W: Write>(w: &mut W, shape: &[usize], data: &[f64]) -> io::Result<()> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "shape does not match data length"));
    }
    let dict = header_text(shape);
    let (version, prefix) = if 10 + dict.len() < u16::MAX as usize { (1u8, 10) } else { (2u8, 12) };
    let unpadded = prefix + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + pad + 1;

    w.write_all(MAGIC)?;
    w.write_all(&[version, 0])?;
    if version == 1 {
        w.write_all(&(header_len as u16).to_le_bytes())?;
    } else {
        w.write_all(&(header_len as u32).to_le_bytes())?;
    }
    w.write_all(dict.as_bytes())?;
    w.write_all(&vec![b' '; pad])?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Tiny parser for the Python literal subset used in npy headers.
mod literal {
    use super::NpyError;

    #[derive(Debug, Clone, PartialEq)]
    pub enum Value {
        Str(String),
        Bool(bool),
        Int(usize),
        Tuple(Vec<Value>),
        Dict(Vec<(String, Value)>),
    }

    struct Parser<'a> {
        s: &'a [u8],
        pos: usize,
    }

    fn err(msg: &str) -> NpyError {
        NpyError::MalformedHeader(msg.to_string())
    }

    pub fn parse(text: &str) -> Result<Value, NpyError> {
        let mut p = Parser { s: text.as_bytes(), pos: 0 };
        let v = p.value()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(err("trailing characters after dict"));
        }
        Ok(v)
    }

    impl Parser<'_> {
        fn ws(&mut self) {
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }

        fn peek(&mut self) -> Option<u8> {
            self.ws();
            self.s.get(self.pos).copied()
        }

        fn expect(&mut self, c: u8) -> Result<(), NpyError> {
            if self.peek() == Some(c) {
                self.pos += 1;
                Ok(())
            } else {
                Err(err(&format!("expected '{}'", c as char)))
            }
        }

        fn value(&mut self) -> Result<Value, NpyError> {
            match self.peek().ok_or_else(|| err("unexpected end"))? {
                b'{' => self.dict(),
                b'(' => self.tuple(),
                b'\'' | b'"' => self.string().map(Value::Str),
                b'0'..=b'9' => self.int(),
                _ => self.word(),
            }
        }

        fn dict(&mut self) -> Result<Value, NpyError> {
            self.expect(b'{')?;
            let mut items = Vec::new();
            loop {
                if self.peek() == Some(b'}') {
                    self.pos += 1;
                    return Ok(Value::Dict(items));
                }
                let key = self.string()?;
                self.expect(b':')?;
                let v = self.value()?;
                items.push((key, v));
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b'}') => {}
                    _ => return Err(err("expected ',' or '}' in dict")),
                }
            }
        }

        fn tuple(&mut self) -> Result<Value, NpyError> {
            self.expect(b'(')?;
            let mut items = Vec::new();
            loop {
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    return Ok(Value::Tuple(items));
                }
                items.push(self.value()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {}
                    _ => return Err(err("expected ',' or ')' in tuple")),
                }
            }
        }

        fn string(&mut self) -> Result<String, NpyError> {
            let quote = self.peek().filter(|c| *c == b'\'' || *c == b'"').ok_or_else(|| err("expected string"))?;
            self.pos += 1;
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos] != quote {
                self.pos += 1;
            }
            if self.pos == self.s.len() {
                return Err(err("unterminated string"));
            }
            let out = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
            self.pos += 1;
            Ok(out)
        }

        fn int(&mut self) -> Result<Value, NpyError> {
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            // python 2 era writers emit longs as `3L`
            let digits = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
            if self.s.get(self.pos) == Some(&b'L') {
                self.pos += 1;
            }
            digits.parse().map(Value::Int).map_err(|_| err("integer out of range"))
        }

        fn word(&mut self) -> Result<Value, NpyError> {
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
                self.pos += 1;
            }
            match &self.s[start..self.pos] {
                b"True" => Ok(Value::Bool(true)),
                b"False" => Ok(Value::Bool(false)),
                _ => Err(err("unexpected token")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(shape: &[usize], data: &[f64]) -> NpyArray {
        let mut buf = Vec::new();
        write_array(&mut buf, shape, data).unwrap();
        assert_eq!(buf[..8], *b"\x93NUMPY\x01\x00");
        let hlen = u16::from_le_bytes([buf[8], buf[9]]) as usize;
        assert_eq!((10 + hlen) % 64, 0);
        assert_eq!(buf[10 + hlen - 1], b'\n');
        read_array(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn writes_numpy_style_header() {
        let mut buf = Vec::new();
        write_array(&mut buf, &[4, 3], &[0.0; 12]).unwrap();
        let text = String::from_utf8_lossy(&buf[10..]);
        assert!(text.starts_with("{'descr': '<f8', 'fortran_order': False, 'shape': (4, 3), }"));
        let mut buf = Vec::new();
        write_array(&mut buf, &[5], &[0.0; 5]).unwrap();
        assert!(String::from_utf8_lossy(&buf[10..]).contains("'shape': (5,)"));
    }

    #[test]
    fn f64_roundtrip_is_bit_exact() {
        let data = [1.0, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI, -2.5];
        let arr = roundtrip(&[2, 3], &data);
        assert_eq!(arr.shape, vec![2, 3]);
        for (a, b) in arr.data.iter().zip(&data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn parses_header_variants() {
        let v = literal::parse("{\"shape\": (2L, 3L), 'fortran_order': True, 'descr': '<f4'}").unwrap();
        let literal::Value::Dict(d) = v else { panic!() };
        assert_eq!(d.len(), 3);
        assert!(literal::parse("{'descr': '<f4'").is_err());
        assert!(literal::parse("{'shape': (2, x)}").is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_array(&mut &b"\x93NUMPX\x01\x00"[..]), Err(NpyError::BadMagic)));
        assert!(matches!(read_array(&mut &b"\x93NU"[..]), Err(NpyError::BadMagic)));
        assert!(matches!(
            read_array(&mut &b"\x93NUMPY\x03\x00\x00\x00"[..]),
            Err(NpyError::UnsupportedVersion { major: 3, .. })
        ));
        assert!(matches!(read_array(&mut &b"\x93NUMPY\x01\x00\x40\x00{'de"[..]), Err(NpyError::TruncatedHeader)));

        let mut buf = Vec::new();
        write_array(&mut buf, &[2, 2], &[1.0, 2.0, 3.0, f64::NAN]).unwrap();
        assert!(matches!(read_array(&mut buf.as_slice()), Err(NpyError::NonFinite { index: 3 })));
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_array(&mut buf.as_slice()), Err(NpyError::TruncatedData { expected: 32, found: 29 })));
    }
}

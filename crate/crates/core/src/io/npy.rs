//! NPY v1.0 arrays: little-endian `<f8` and `<i8`, C order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F64(Vec<f64>),
    I64(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    fn descr(&self) -> &'static str {
        match self.data {
            NpyData::F64(_) => "<f8",
            NpyData::I64(_) => "<i8",
        }
    }

    fn len(&self) -> usize {
        match &self.data {
            NpyData::F64(v) => v.len(),
            NpyData::I64(v) => v.len(),
        }
    }
}

fn header(descr: &str, shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    let mut h = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    // magic + version + length field take 10 bytes, the header ends in '\n'
    let pad = (ALIGN - (10 + h.len() + 1) % ALIGN) % ALIGN;
    h.push_str(&" ".repeat(pad));
    h.push('\n');
    h.into_bytes()
}

pub fn encode(array: &NpyArray) -> Result<Vec<u8>> {
    if array.shape.iter().product::<usize>() != array.len() {
        return Err(Error::ShapeMismatch {
            expected: array.shape.clone(),
            actual: vec![array.len()],
        });
    }
    let h = header(array.descr(), &array.shape);
    let len = u16::try_from(h.len()).map_err(|_| Error::MalformedHeader("header longer than 65535 bytes".into()))?;
    let mut out = Vec::with_capacity(10 + h.len() + 8 * array.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&h);
    match &array.data {
        NpyData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(out)
}

/// Value of `'key': <value>` in a header dict, up to the next top-level
/// comma.
fn field<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}':");
    let start = dict.find(&pat).ok_or_else(|| Error::MalformedHeader(format!("missing key {key:?}")))? + pat.len();
    let rest = dict[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| Error::MalformedHeader(format!("unterminated value for {key:?}")))?;
    Ok(rest[..end].trim())
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    let inner = s
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::MalformedHeader(format!("shape {s:?} is not a tuple")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::MalformedHeader(format!("bad dimension {t:?}"))))
        .collect()
}

pub fn decode(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::MalformedHeader("missing \\x93NUMPY magic".into()));
    }
    if bytes[6] != 1 {
        return Err(Error::MalformedHeader(format!("unsupported format version {}.{}", bytes[6], bytes[7])));
    }
    let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body = 10 + hlen;
    if bytes.len() < body {
        return Err(Error::MalformedHeader("header runs past end of file".into()));
    }
    let dict = std::str::from_utf8(&bytes[10..body]).map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let dict = dict.trim();
    if !dict.starts_with('{') || !dict.ends_with('}') {
        return Err(Error::MalformedHeader("header is not a dict".into()));
    }
    let descr = field(dict, "descr")?.trim_matches(['\'', '"']).to_string();
    match field(dict, "fortran_order")? {
        "False" => {}
        "True" => return Err(Error::MalformedHeader("Fortran-ordered arrays are not supported".into())),
        other => return Err(Error::MalformedHeader(format!("fortran_order {other:?}"))),
    }
    let shape = parse_shape(field(dict, "shape")?)?;
    let n: usize = shape.iter().product();
    let payload = &bytes[body..];
    let check = || {
        if payload.len() != 8 * n {
            return Err(Error::TruncatedPayload {
                expected: 8 * n,
                found: payload.len(),
            });
        }
        Ok(payload.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).expect("chunk of 8")))
    };
    let data = match descr.as_str() {
        "<f8" => NpyData::F64(check()?.map(f64::from_le_bytes).collect()),
        "<i8" => NpyData::I64(check()?.map(i64::from_le_bytes).collect()),
        _ => return Err(Error::UnsupportedDtype(descr)),
    };
    Ok(NpyArray { shape, data })
}

pub fn write_npy(path: &Path, array: &NpyArray) -> Result<()> {
    if let NpyData::F64(v) = &array.data {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput(path.display().to_string()));
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode(array)?)?;
    Ok(())
}

pub fn read_npy(path: &Path) -> Result<NpyArray> {
    decode(&fs::read(path)?)
}

pub fn write_array(path: &Path, tensor: &Tensor) -> Result<()> {
    write_npy(
        path,
        &NpyArray {
            shape: tensor.shape().to_vec(),
            data: NpyData::F64(tensor.data().to_vec()),
        },
    )
}

/// Reads a `<f8` array; integer files are rejected rather than cast.
pub fn read_array(path: &Path) -> Result<Tensor> {
    let a = read_npy(path)?;
    match a.data {
        NpyData::F64(v) => Tensor::new(a.shape, v),
        NpyData::I64(_) => Err(Error::UnsupportedDtype("<i8 (a float array was expected)".into())),
    }
}

pub fn write_i64(path: &Path, shape: Vec<usize>, values: Vec<i64>) -> Result<()> {
    write_npy(
        path,
        &NpyArray {
            shape,
            data: NpyData::I64(values),
        },
    )
}

pub fn read_i64(path: &Path) -> Result<(Vec<usize>, Vec<i64>)> {
    let a = read_npy(path)?;
    match a.data {
        NpyData::I64(v) => Ok((a.shape, v)),
        NpyData::F64(_) => Err(Error::UnsupportedDtype("<f8 (an integer array was expected)".into())),
    }
}

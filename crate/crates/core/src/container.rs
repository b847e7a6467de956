//! Versioned little-endian binary container used for model files and
//! fitted-transform caches.
//!
//! Layout: magic `STNCBIN\0`, format version (u32), kind string, section
//! count (u32), then per section: name, dtype tag (u8), rank (u32), dims
//! (u64 each), payload byte length (u64), payload. Strings are a u32 byte
//! length followed by UTF-8.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"STNCBIN\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SectionData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U64(Vec<u64>),
    Bytes(Vec<u8>),
}

impl SectionData {
    fn tag(&self) -> u8 {
        match self {
            SectionData::F32(_) => 0,
            SectionData::F64(_) => 1,
            SectionData::U64(_) => 2,
            SectionData::Bytes(_) => 3,
        }
    }

    fn len(&self) -> usize {
        match self {
            SectionData::F32(v) => v.len(),
            SectionData::F64(v) => v.len(),
            SectionData::U64(v) => v.len(),
            SectionData::Bytes(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub shape: Vec<u64>,
    pub data: SectionData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub sections: Vec<Section>,
}

impl Container {
    pub fn new(kind: impl Into<String>) -> Self {
        Container {
            kind: kind.into(),
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: SectionData) -> Result<()> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        if self.sections.iter().any(|s| s.name == name) {
            return Err(Error::DuplicateId(name));
        }
        self.sections.push(Section {
            name,
            shape: shape.iter().map(|&d| d as u64).collect(),
            data,
        });
        Ok(())
    }

    pub fn push_text(&mut self, name: impl Into<String>, text: &str) -> Result<()> {
        let bytes = text.as_bytes().to_vec();
        self.push(name, &[bytes.len()], SectionData::Bytes(bytes))
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Format(format!("{} container has no section {name:?}", self.kind)))
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match &self.section(name)?.data {
            SectionData::Bytes(b) => {
                std::str::from_utf8(b).map_err(|_| Error::Format(format!("section {name:?} is not UTF-8")))
            }
            _ => Err(Error::Format(format!("section {name:?} is not text"))),
        }
    }

    pub fn f32s(&self, name: &str) -> Result<(&[u64], &[f32])> {
        let s = self.section(name)?;
        match &s.data {
            SectionData::F32(v) => Ok((&s.shape, v)),
            _ => Err(Error::Format(format!("section {name:?} is not f32"))),
        }
    }

    pub fn f64s(&self, name: &str) -> Result<(&[u64], &[f64])> {
        let s = self.section(name)?;
        match &s.data {
            SectionData::F64(v) => Ok((&s.shape, v)),
            _ => Err(Error::Format(format!("section {name:?} is not f64"))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<(&[u64], &[u64])> {
        let s = self.section(name)?;
        match &s.data {
            SectionData::U64(v) => Ok((&s.shape, v)),
            _ => Err(Error::Format(format!("section {name:?} is not u64"))),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_str(w, &self.kind)?;
        w.write_all(&(self.sections.len() as u32).to_le_bytes())?;
        for s in &self.sections {
            write_str(w, &s.name)?;
            w.write_all(&[s.data.tag()])?;
            w.write_all(&(s.shape.len() as u32).to_le_bytes())?;
            for d in &s.shape {
                w.write_all(&d.to_le_bytes())?;
            }
            let bytes: Vec<u8> = match &s.data {
                SectionData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
                SectionData::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
                SectionData::U64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
                SectionData::Bytes(v) => v.clone(),
            };
            w.write_all(&(bytes.len() as u64).to_le_bytes())?;
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a stance binary container".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {version} (this build reads version {VERSION})"
            )));
        }
        let kind = read_str(r)?;
        let n = read_u32(r)?;
        let mut sections = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let name = read_str(r)?;
            let mut tag = [0u8; 1];
            read_exact(r, &mut tag)?;
            let rank = read_u32(r)?;
            let shape = (0..rank).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?;
            let len = read_u64(r)? as usize;
            let mut bytes = vec![0u8; len];
            read_exact(r, &mut bytes)?;
            let data = match tag[0] {
                0 => SectionData::F32(chunks(&bytes, f32::from_le_bytes)?),
                1 => SectionData::F64(chunks(&bytes, f64::from_le_bytes)?),
                2 => SectionData::U64(chunks(&bytes, u64::from_le_bytes)?),
                3 => SectionData::Bytes(bytes),
                t => return Err(Error::Format(format!("unknown section dtype tag {t}"))),
            };
            let expected: u64 = shape.iter().product();
            if expected != data.len() as u64 {
                return Err(Error::Format(format!("section {name:?} payload does not match its shape")));
            }
            sections.push(Section { name, shape, data });
        }
        Ok(Container { kind, sections })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write_to(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    /// Loads a container and checks its kind.
    pub fn load(path: &Path, kind: &str) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let c = Self::read_from(&mut BufReader::new(f))
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if c.kind != kind {
            return Err(Error::Format(format!(
                "{}: expected a {kind} container, found {}",
                path.display(),
                c.kind
            )));
        }
        Ok(c)
    }
}

fn chunks<const N: usize, T>(bytes: &[u8], f: fn([u8; N]) -> T) -> Result<Vec<T>> {
    if !bytes.len().is_multiple_of(N) {
        return Err(Error::Format("section payload length is not a multiple of its element size".into()));
    }
    Ok(bytes
        .chunks_exact(N)
        .map(|c| f(c.try_into().expect("exact chunk")))
        .collect())
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated container: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    read_exact(r, &mut b)?;
    String::from_utf8(b).map_err(|_| Error::Format("container string is not UTF-8".into()))
}

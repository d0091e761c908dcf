//! Little-endian primitives shared by the binary file formats (feature
//! archive, model file, vector archive, backend file).

use std::io::{self, Read, Write};

/// Low-level decode failures, mapped into the owning module's error type.
#[derive(Debug)]
pub enum BytesError {
    Io(io::Error),
    /// Stream ended inside a field.
    Truncated,
    /// Leading magic did not match.
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    /// Unsupported format version.
    Version { expected: u32, found: u32 },
    /// Length-prefixed string was not valid UTF-8.
    BadUtf8,
}

impl std::fmt::Display for BytesError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BytesError::Io(e) => write!(f, "i/o error: {e}"),
            BytesError::Truncated => write!(f, "file truncated"),
            BytesError::BadMagic { expected, found } => write!(
                f,
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(found)
            ),
            BytesError::Version { expected, found } => {
                write!(f, "unsupported version {found} (expected {expected})")
            }
            BytesError::BadUtf8 => write!(f, "invalid utf-8 in string field"),
        }
    }
}

impl std::error::Error for BytesError {}

impl From<io::Error> for BytesError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            BytesError::Truncated
        } else {
            BytesError::Io(e)
        }
    }
}

pub fn write_magic(w: &mut impl Write, magic: &[u8; 4]) -> io::Result<()> {
    w.write_all(magic)
}

pub fn expect_magic(r: &mut impl Read, expected: &[u8; 4]) -> Result<(), BytesError> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != expected {
        return Err(BytesError::BadMagic {
            expected: *expected,
            found,
        });
    }
    Ok(())
}

pub fn expect_version(r: &mut impl Read, expected: u32) -> Result<(), BytesError> {
    let found = read_u32(r)?;
    if found != expected {
        return Err(BytesError::Version { expected, found });
    }
    Ok(())
}

pub fn write_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn read_u32(r: &mut impl Read) -> Result<u32, BytesError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_u8(w: &mut impl Write, v: u8) -> io::Result<()> {
    w.write_all(&[v])
}

pub fn read_u8(r: &mut impl Read) -> Result<u8, BytesError> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

pub fn write_f32_slice(w: &mut impl Write, values: &[f32]) -> io::Result<()> {
    // Buffered conversion; one write per 8k values keeps syscalls down.
    let mut buf = Vec::with_capacity(4 * values.len().min(8192));
    for chunk in values.chunks(8192) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_f32_vec(r: &mut impl Read, count: usize) -> Result<Vec<f32>, BytesError> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

/// u32 byte length + UTF-8 bytes.
pub fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub fn read_str(r: &mut impl Read, max_len: usize) -> Result<String, BytesError> {
    let len = read_u32(r)? as usize;
    if len > max_len {
        return Err(BytesError::Truncated);
    }
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|_| BytesError::BadUtf8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn primitives_round_trip() {
        let mut buf = Vec::new();
        write_magic(&mut buf, b"TEST").unwrap();
        write_u32(&mut buf, 7).unwrap();
        write_str(&mut buf, "hello").unwrap();
        write_f32_slice(&mut buf, &[1.5, -2.25]).unwrap();
        let mut cur = Cursor::new(buf);
        expect_magic(&mut cur, b"TEST").unwrap();
        assert_eq!(read_u32(&mut cur).unwrap(), 7);
        assert_eq!(read_str(&mut cur, 1024).unwrap(), "hello");
        assert_eq!(read_f32_vec(&mut cur, 2).unwrap(), vec![1.5, -2.25]);
    }

    #[test]
    fn truncation_is_detected() {
        let mut buf = Vec::new();
        write_u32(&mut buf, 100).unwrap();
        buf.truncate(2);
        let mut cur = Cursor::new(buf);
        assert!(matches!(read_u32(&mut cur), Err(BytesError::Truncated)));
    }

    #[test]
    fn bad_magic_is_detected() {
        let mut cur = Cursor::new(b"NOPE....".to_vec());
        assert!(matches!(
            expect_magic(&mut cur, b"FEAT"),
            Err(BytesError::BadMagic { .. })
        ));
    }
}

//! Length-prefixed mask frames: `width: u32 LE`, `height: u32 LE`, then
//! `width * height` bytes (>= 128 is foreground).

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub struct FrameReader<R> {
    inner: R,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    /// Next frame, or `None` on a clean end of stream.
    pub fn next_frame(&mut self) -> Result<Option<BinaryMask>> {
        let mut header = [0u8; 8];
        let mut filled = 0;
        while filled < header.len() {
            match self.inner.read(&mut header[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(Error::format("frame stream", "truncated header")),
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let width = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
        let mut body = vec![0u8; width * height];
        self.inner.read_exact(&mut body).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::format("frame stream", "truncated frame body")
            } else {
                e.into()
            }
        })?;
        BinaryMask::from_bytes(width, height, &body).map(Some)
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<BinaryMask>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub fn write_frame(out: &mut impl Write, mask: &BinaryMask) -> Result<()> {
    out.write_all(&(mask.width() as u32).to_le_bytes())?;
    out.write_all(&(mask.height() as u32).to_le_bytes())?;
    out.write_all(&mask.to_bytes())?;
    Ok(())
}

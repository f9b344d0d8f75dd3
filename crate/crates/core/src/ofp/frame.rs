use super::{OfHeader, HEADER_LEN};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("framing error: header declares length {length} (minimum is 8)")]
pub struct FramingError {
    pub length: u16,
}

/// Splits a byte stream into OpenFlow frames using the header length.
/// Owned by one connection; any partial trailing frame stays buffered.
#[derive(Debug, Default)]
pub struct FrameBuffer {
    buf: Vec<u8>,
    start: usize,
}

impl FrameBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, data: &[u8]) {
        if self.start > 0 && self.start * 2 >= self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(data);
    }

    /// Bytes of an incomplete frame not yet emitted.
    pub fn residual(&self) -> &[u8] {
        &self.buf[self.start..]
    }

    /// The next complete frame, if one is buffered.
    pub fn next_frame(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        let pending = &self.buf[self.start..];
        if pending.len() < HEADER_LEN {
            return Ok(None);
        }
        let header = OfHeader::parse(pending).expect("header length checked");
        let len = header.length as usize;
        if len < HEADER_LEN {
            return Err(FramingError {
                length: header.length,
            });
        }
        if pending.len() < len {
            return Ok(None);
        }
        let frame = pending[..len].to_vec();
        self.start += len;
        Ok(Some(frame))
    }

    /// All complete frames currently buffered.
    pub fn drain_frames(&mut self) -> Result<Vec<Vec<u8>>, FramingError> {
        let mut out = Vec::new();
        while let Some(f) = self.next_frame()? {
            out.push(f);
        }
        Ok(out)
    }
}

/// Split a whole buffer in one go: complete frames plus the residual.
pub fn frame_stream(buffer: &[u8]) -> Result<(Vec<Vec<u8>>, Vec<u8>), FramingError> {
    let mut fb = FrameBuffer::new();
    fb.extend(buffer);
    let frames = fb.drain_frames()?;
    Ok((frames, fb.residual().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HELLO: [u8; 8] = [4, 0, 0, 8, 0, 0, 0, 0x11];

    #[test]
    fn two_frames_in_one_read() {
        let mut data = HELLO.to_vec();
        data.extend_from_slice(&HELLO);
        let (frames, residual) = frame_stream(&data).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(residual.is_empty());
    }

    #[test]
    fn frame_split_across_three_reads() {
        let mut fb = FrameBuffer::new();
        let mut counts = Vec::new();
        for chunk in [&HELLO[..3], &HELLO[3..6], &HELLO[6..]] {
            fb.extend(chunk);
            counts.push(fb.drain_frames().unwrap().len());
        }
        assert_eq!(counts, vec![0, 0, 1]);
        assert!(fb.residual().is_empty());
    }

    #[test]
    fn short_length_is_fatal() {
        let mut fb = FrameBuffer::new();
        fb.extend(&[4, 0, 0, 6, 0, 0, 0, 1]);
        assert_eq!(fb.next_frame().unwrap_err(), FramingError { length: 6 });
    }
}

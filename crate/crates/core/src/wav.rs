//! Minimal RIFF/WAVE reader and writer for 16-bit PCM, with frame-exact cutting.

use thiserror::Error;

const PCM_FORMAT: u16 = 1;
const HEADER_LEN: usize = 44;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WavError {
    #[error("not a RIFF/WAVE file")]
    NotRiff,
    #[error("missing {0} chunk")]
    MissingChunk(&'static str),
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("unsupported encoding: format tag {format_tag}, {bits} bits")]
    Unsupported { format_tag: u16, bits: u16 },
    #[error("unsupported channel count {0}")]
    Channels(u16),
    #[error("inconsistent fmt fields: {0}")]
    Inconsistent(&'static str),
}

/// Format fields of a 16-bit PCM stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavFormat {
    pub channels: u16,
    pub sample_rate: u32,
}

impl WavFormat {
    pub const BITS_PER_SAMPLE: u16 = 16;

    pub fn block_align(&self) -> usize {
        usize::from(self.channels) * 2
    }

    pub fn byte_rate(&self) -> u32 {
        self.sample_rate * u32::from(self.channels) * 2
    }
}

/// Decoded audio: format plus the raw little-endian data region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavAudio {
    format: WavFormat,
    data: Vec<u8>,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

impl WavAudio {
    pub fn new(format: WavFormat, data: Vec<u8>) -> Result<Self, WavError> {
        if !(1..=2).contains(&format.channels) {
            return Err(WavError::Channels(format.channels));
        }
        if format.sample_rate == 0 {
            return Err(WavError::Inconsistent("zero sample rate"));
        }
        if data.len() % format.block_align() != 0 {
            return Err(WavError::Inconsistent("data length is not a whole number of frames"));
        }
        Ok(Self { format, data })
    }

    /// Parses a RIFF/WAVE byte stream. Unknown chunks are skipped. A data
    /// chunk whose declared size runs past the end of the input (an
    /// unfinished streamed recording) is cut back to the whole frames present.
    pub fn decode(bytes: &[u8]) -> Result<Self, WavError> {
        if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
            return Err(WavError::NotRiff);
        }
        let mut format = None;
        let mut pos = 12;
        while pos + 8 <= bytes.len() {
            let id = &bytes[pos..pos + 4];
            let size = u32_at(bytes, pos + 4) as usize;
            let body = pos + 8;
            match id {
                b"fmt " => {
                    if size < 16 || body + 16 > bytes.len() {
                        return Err(WavError::Truncated("fmt chunk"));
                    }
                    format = Some(parse_fmt(&bytes[body..body + 16])?);
                }
                b"data" => {
                    let format = format.ok_or(WavError::MissingChunk("fmt"))?;
                    let available = bytes.len() - body;
                    let data = if size <= available {
                        &bytes[body..body + size]
                    } else {
                        let whole = available - available % format.block_align();
                        &bytes[body..body + whole]
                    };
                    return WavAudio::new(format, data.to_vec());
                }
                _ => {}
            }
            // chunks are word aligned
            pos = body.saturating_add(size).saturating_add(size & 1);
        }
        Err(WavError::MissingChunk(if format.is_some() { "data" } else { "fmt" }))
    }

    /// Canonical 44-byte-header encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len());
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + self.data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
        out.extend_from_slice(&self.format.channels.to_le_bytes());
        out.extend_from_slice(&self.format.sample_rate.to_le_bytes());
        out.extend_from_slice(&self.format.byte_rate().to_le_bytes());
        out.extend_from_slice(&(self.format.block_align() as u16).to_le_bytes());
        out.extend_from_slice(&WavFormat::BITS_PER_SAMPLE.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(self.data.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn format(&self) -> WavFormat {
        self.format
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.format.block_align()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / f64::from(self.format.sample_rate)
    }

    /// Frame range `[floor(start*rate), min(floor(end*rate), frames))`.
    pub fn frame_range(&self, start_s: f64, end_s: f64) -> std::ops::Range<usize> {
        let rate = f64::from(self.format.sample_rate);
        let to_frame = |s: f64| ((s.max(0.0) * rate).floor() as usize).min(self.frames());
        let start = to_frame(start_s);
        start..to_frame(end_s).max(start)
    }

    pub fn cut(&self, start_s: f64, end_s: f64) -> WavAudio {
        let frames = self.frame_range(start_s, end_s);
        let ba = self.format.block_align();
        WavAudio { format: self.format, data: self.data[frames.start * ba..frames.end * ba].to_vec() }
    }

    /// A sine test tone of the given length.
    pub fn tone(sample_rate: u32, channels: u16, seconds: f64, freq_hz: f64) -> Self {
        let format = WavFormat { channels, sample_rate };
        let frames = (seconds * f64::from(sample_rate)).round() as usize;
        let mut data = Vec::with_capacity(frames * format.block_align());
        for i in 0..frames {
            let t = i as f64 / f64::from(sample_rate);
            let v = ((t * freq_hz * std::f64::consts::TAU).sin() * 12_000.0) as i16;
            for _ in 0..channels {
                data.extend_from_slice(&v.to_le_bytes());
            }
        }
        WavAudio { format, data }
    }
}

fn parse_fmt(fmt: &[u8]) -> Result<WavFormat, WavError> {
    let format_tag = u16_at(fmt, 0);
    let channels = u16_at(fmt, 2);
    let sample_rate = u32_at(fmt, 4);
    let byte_rate = u32_at(fmt, 8);
    let block_align = u16_at(fmt, 12);
    let bits = u16_at(fmt, 14);
    if format_tag != PCM_FORMAT || bits != WavFormat::BITS_PER_SAMPLE {
        return Err(WavError::Unsupported { format_tag, bits });
    }
    if !(1..=2).contains(&channels) {
        return Err(WavError::Channels(channels));
    }
    let format = WavFormat { channels, sample_rate };
    if sample_rate == 0 {
        return Err(WavError::Inconsistent("zero sample rate"));
    }
    if usize::from(block_align) != format.block_align() || byte_rate != format.byte_rate() {
        return Err(WavError::Inconsistent("block_align/byte_rate"));
    }
    Ok(format)
}

/// Cuts one standalone clip per `(start_s, end_s)` interval.
pub fn cut_wav(source: &WavAudio, intervals: &[(f64, f64)]) -> Vec<WavAudio> {
    intervals.iter().map(|&(s, e)| source.cut(s, e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_identity() {
        let tone = WavAudio::tone(8000, 2, 0.5, 440.0);
        let decoded = WavAudio::decode(&tone.encode()).unwrap();
        assert_eq!(decoded, tone);
    }

    #[test]
    fn full_interval_is_identity() {
        let tone = WavAudio::tone(8000, 1, 3.0, 440.0);
        let cut = cut_wav(&tone, &[(0.0, 3.0)]);
        assert_eq!(cut[0].data(), tone.data());
    }

    #[test]
    fn offsets_follow_sample_rate() {
        let tone = WavAudio::tone(8000, 1, 300.0, 440.0);
        assert_eq!(tone.frame_range(120.0, 240.0), 960_000..1_920_000);
        let clip = tone.cut(120.0, 240.0);
        assert_eq!(clip.data(), &tone.data()[1_920_000..3_840_000]);
    }

    #[test]
    fn end_past_audio_is_clamped() {
        let tone = WavAudio::tone(8000, 1, 2.0, 440.0);
        assert_eq!(tone.frame_range(1.0, 10.0), 8000..16_000);
        assert_eq!(tone.frame_range(5.0, 10.0), 16_000..16_000);
    }

    #[test]
    fn rejects_non_pcm_and_garbage() {
        let mut bytes = WavAudio::tone(8000, 1, 0.1, 440.0).encode();
        assert_eq!(WavAudio::decode(b"nope"), Err(WavError::NotRiff));
        bytes[20] = 3; // IEEE float
        assert!(matches!(WavAudio::decode(&bytes), Err(WavError::Unsupported { format_tag: 3, .. })));
        let mut eight_bit = WavAudio::tone(8000, 1, 0.1, 440.0).encode();
        eight_bit[34] = 8;
        assert!(matches!(WavAudio::decode(&eight_bit), Err(WavError::Unsupported { bits: 8, .. })));
        let mut three_ch = WavAudio::tone(8000, 1, 0.1, 440.0).encode();
        three_ch[22] = 3;
        assert_eq!(WavAudio::decode(&three_ch), Err(WavError::Channels(3)));
        assert_eq!(WavAudio::decode(&bytes[..30]), Err(WavError::Truncated("fmt chunk")));
    }

    #[test]
    fn skips_unknown_chunks() {
        let tone = WavAudio::tone(16_000, 1, 0.01, 440.0);
        let enc = tone.encode();
        let mut bytes = enc[..12].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(b"abc\0");
        bytes.extend_from_slice(&enc[12..]);
        assert_eq!(WavAudio::decode(&bytes).unwrap(), tone);
    }

    #[test]
    fn streamed_data_size_is_trimmed_to_whole_frames() {
        let tone = WavAudio::tone(8000, 2, 0.01, 440.0);
        let mut bytes = tone.encode();
        bytes[40..44].copy_from_slice(&u32::MAX.to_le_bytes());
        bytes.pop();
        let decoded = WavAudio::decode(&bytes).unwrap();
        assert_eq!(decoded.frames(), tone.frames() - 1);
    }
}

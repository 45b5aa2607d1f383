use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Label, RawSignal};
use crate::{Error, Result};

fn source_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// One amplitude per line; a single non-numeric first line is treated as a
/// header. The result is labeled normal; callers attach the real label.
pub fn load_csv(path: &Path, sample_rate: f64) -> Result<RawSignal> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let field = line.trim().trim_end_matches(',').trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => samples.push(v),
            Ok(_) => return Err(Error::file(path, format!("line {}: non-finite value", lineno + 1))),
            Err(_) if lineno == 0 => {}
            Err(_) => {
                return Err(Error::file(path, format!("line {}: cannot parse `{field}` as a number", lineno + 1)))
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::file(path, "no samples"));
    }
    RawSignal::new(samples, sample_rate, source_id(path), Label::Normal)
}

pub fn write_csv(path: &Path, signal: &RawSignal) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::file(path, e))?);
    writeln!(out, "amplitude")?;
    for v in &signal.samples {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// 16-bit PCM; samples scaled by 1/32768. Multi-channel files need an
/// explicit `channel`.
pub fn load_wav(path: &Path, channel: Option<usize>) -> Result<RawSignal> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::file(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::file(
            path,
            format!("unsupported WAV encoding: {:?} {}-bit (need 16-bit PCM)", spec.sample_format, spec.bits_per_sample),
        ));
    }
    let channels = spec.channels as usize;
    let selected = match (channels, channel) {
        (1, None) => 0,
        (_, None) => {
            return Err(Error::file(path, format!("{channels}-channel WAV needs a channel selection")));
        }
        (_, Some(k)) if k >= channels => {
            return Err(Error::file(path, format!("channel {k} out of range for {channels}-channel WAV")));
        }
        (_, Some(k)) => k,
    };
    let mut samples = Vec::with_capacity(reader.len() as usize / channels);
    for (i, s) in reader.samples::<i16>().enumerate() {
        let s = s.map_err(|e| Error::file(path, e))?;
        if i % channels == selected {
            samples.push(f64::from(s) / 32768.0);
        }
    }
    if samples.is_empty() {
        return Err(Error::file(path, "no samples"));
    }
    RawSignal::new(samples, f64::from(spec.sample_rate), source_id(path), Label::Normal)
}

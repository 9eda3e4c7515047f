//! Artifact writers: CSV at full double precision, 8-bit PGM and PNG.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: u64,
}

/// Writes files into one directory and records what it wrote.
pub struct Outputs {
    dir: PathBuf,
    pub manifest: Vec<Artifact>,
}

/// One CSV field.
pub enum Cell {
    F(f64),
    U(usize),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::U(x as usize)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl Outputs {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), manifest: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.manifest.retain(|a| a.path != name);
        self.manifest.push(Artifact { path: name.to_string(), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> io::Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    text.push(',');
                }
                match cell {
                    Cell::F(x) => text.push_str(&fmt_f64(*x)),
                    Cell::U(u) => write!(text, "{u}").expect("string write"),
                    Cell::S(s) => text.push_str(s),
                }
            }
            text.push('\n');
        }
        self.record(name, text.as_bytes())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.record(name, text.as_bytes())
    }

    /// Writes `stem.pgm` and `stem.png` from a row-major grid whose row index grows
    /// with the imaginary part; the image is flipped so that up is `+i`.
    pub fn image(&mut self, stem: &str, res: usize, pixels: &[u8]) -> io::Result<()> {
        assert_eq!(pixels.len(), res * res, "pixel buffer does not match the resolution");
        let flipped: Vec<u8> = pixels.chunks(res).rev().flatten().copied().collect();
        let mut pgm = format!("P5\n{res} {res}\n255\n").into_bytes();
        pgm.extend_from_slice(&flipped);
        self.record(&format!("{stem}.pgm"), &pgm)?;
        let img = image::GrayImage::from_raw(res as u32, res as u32, flipped).expect("buffer size checked");
        let mut png = Vec::new();
        img.write_to(&mut io::Cursor::new(&mut png), image::ImageFormat::Png).map_err(io::Error::other)?;
        self.record(&format!("{stem}.png"), &png)
    }
}

/// Maps nonnegative values to gray levels by `sqrt(v / max)`.
pub fn gray_sqrt(values: &[f64]) -> Vec<u8> {
    let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| if max > 0.0 && v > 0.0 && v.is_finite() { (255.0 * (v / max).sqrt()).round() as u8 } else { 0 })
        .collect()
}

pub fn gray_mask(cells: &[bool]) -> Vec<u8> {
    cells.iter().map(|&b| if b { 255 } else { 0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn writers_fill_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.csv("a.csv", &["n", "x"], vec![vec![Cell::U(1), Cell::F(0.5)]]).unwrap();
        out.image("img", 2, &[0, 64, 128, 255]).unwrap();
        let names: Vec<_> = out.manifest.iter().map(|a| a.path.as_str()).collect();
        assert_eq!(names, ["a.csv", "img.pgm", "img.png"]);
        let pgm = std::fs::read(dir.path().join("img.pgm")).unwrap();
        assert!(pgm.starts_with(b"P5\n2 2\n255\n"));
        // Flipped: the second row comes first.
        assert_eq!(&pgm[pgm.len() - 4..], &[128, 255, 0, 64]);
        assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).unwrap(), "n,x\n1,5.0000000000000000e-1\n");
    }
}

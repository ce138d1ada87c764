use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Grayscale image with integer brightness `0..=255`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::dim("image pixels", width * height, pixels.len()));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Reads a binary (`P5`) or ASCII (`P2`) PGM with maxval at most 255.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut pos = 0;
    let mut token = || -> Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |t: String| t.parse::<usize>().map_err(|_| format!("bad header field `{t}`"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let n = width * height;
    let pixels = match magic.as_str() {
        "P5" => {
            let start = pos + 1;
            let data = bytes.get(start..start + n).ok_or("truncated pixel data")?;
            data.to_vec()
        }
        "P2" => (0..n)
            .map(|_| token().and_then(|t| t.parse::<u8>().map_err(|_| format!("bad pixel `{t}`"))))
            .collect::<Result<Vec<u8>, String>>()?,
        other => return Err(format!("unsupported PGM magic `{other}`")),
    };
    Ok(GrayImage { width, height, pixels })
}

/// Writes a binary `P5` PGM.
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write!(f, "P5\n{} {}\n255\n", img.width, img.height).map_err(|e| Error::io(path, e))?;
    f.write_all(&img.pixels).map_err(|e| Error::io(path, e))
}

/// Tiles equally sized `rows x cols` images into one grid image with a
/// one-pixel black border; values are mapped linearly from `[lo, hi]`.
pub fn tile_grid(images: &[Vec<f64>], rows: usize, cols: usize, per_row: usize, lo: f64, hi: f64) -> GrayImage {
    let per_row = per_row.max(1);
    let n_rows = images.len().div_ceil(per_row).max(1);
    let width = per_row * (cols + 1) + 1;
    let height = n_rows * (rows + 1) + 1;
    let mut pixels = vec![0u8; width * height];
    let span = if hi > lo { hi - lo } else { 1.0 };
    for (k, img) in images.iter().enumerate() {
        let (gr, gc) = (k / per_row, k % per_row);
        for r in 0..rows {
            for c in 0..cols {
                let v = img.get(r * cols + c).copied().unwrap_or(lo);
                let g = ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8;
                pixels[(gr * (rows + 1) + 1 + r) * width + gc * (cols + 1) + 1 + c] = g;
            }
        }
    }
    GrayImage { width, height, pixels }
}

/// Dequantizes, rescales to `[0, 1]`, removes the patch mean and drops the
/// bottom-right pixel.
pub fn process_patch<R: Rng + ?Sized>(raw: &[u8], rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = raw.iter().map(|&p| (p as f64 + rng.random::<f64>()) / 256.0).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v[..v.len() - 1].iter().map(|x| x - mean).collect()
}

/// Draws `n` random `size x size` patches from uniformly chosen images and
/// processes each with [`process_patch`]; rows have `size * size - 1` entries.
pub fn patch_pipeline<R: Rng + ?Sized>(images: &[GrayImage], size: usize, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if images.is_empty() {
        return Err(Error::Dataset("no images".into()));
    }
    if size < 2 {
        return Err(Error::Config(format!("patch size must be at least 2, got {size}")));
    }
    if let Some(img) = images.iter().find(|i| i.width < size || i.height < size) {
        return Err(Error::Dataset(format!(
            "patch size {size} exceeds image {}x{}",
            img.width, img.height
        )));
    }
    let mut out = Vec::with_capacity(n);
    let mut raw = vec![0u8; size * size];
    for _ in 0..n {
        let img = &images[rng.random_range(0..images.len())];
        let top = rng.random_range(0..=img.height - size);
        let left = rng.random_range(0..=img.width - size);
        for r in 0..size {
            for c in 0..size {
                raw[r * size + c] = img.at(top + r, left + c);
            }
        }
        out.push(process_patch(&raw, rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::new(w, h, (0..w * h).map(|i| (i % 256) as u8).collect()).unwrap()
    }

    #[test]
    fn constant_zero_patch_is_bounded() {
        let img = GrayImage::new(8, 8, vec![0; 64]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows = patch_pipeline(&[img], 8, 50, &mut rng).unwrap();
        for r in &rows {
            assert_eq!(r.len(), 63);
            assert!(r.iter().all(|&v| v > -1.0 / 256.0 && v < 1.0 / 256.0));
        }
    }

    #[test]
    fn reproducible_with_seed() {
        let imgs = [ramp(20, 15), ramp(9, 30)];
        let a = patch_pipeline(&imgs, 8, 20, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = patch_pipeline(&imgs, 8, 20, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn patch_larger_than_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(patch_pipeline(&[ramp(6, 20)], 8, 1, &mut rng).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let img = ramp(5, 3);
        write_pgm(&path, &img).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
        let ascii = parse_pgm(b"P2\n# c\n2 1\n255\n3 250\n").unwrap();
        assert_eq!(ascii.pixels, vec![3, 250]);
    }
}

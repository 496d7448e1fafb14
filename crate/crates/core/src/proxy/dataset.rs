//! Synthetic two-modality clips.
//!
//! Class `g * periods + j` shows appearance pattern `g` (a coloured oriented
//! grating, static in time) and a motion field that flips sign every `2^j`
//! frames. Appearance alone identifies the group but says nothing about the
//! period, so a classifier has to read both modalities, and the period can
//! only be resolved with enough temporal context.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MSNASDS1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Appearance patterns.
    pub groups: usize,
    /// Motion periods per pattern; period `j` flips every `2^j` frames.
    pub periods: usize,
    pub clips_per_class: usize,
    pub frames: usize,
    /// Height and width.
    pub size: usize,
    pub appearance_channels: usize,
    pub motion_channels: usize,
    /// Std of the additive Gaussian noise on the appearance modality.
    pub noise: f64,
    /// Std of the additive Gaussian noise on the motion modality.
    pub motion_noise: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            groups: 4,
            periods: 3,
            clips_per_class: 40,
            frames: 16,
            size: 16,
            appearance_channels: 3,
            motion_channels: 2,
            noise: 0.5,
            motion_noise: 0.5,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn num_classes(&self) -> usize {
        self.groups * self.periods
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("dataset: {msg}")));
        if self.num_classes() < 6 {
            return bad("need at least 6 classes so top-5 accuracy is meaningful");
        }
        if self.frames == 0 || self.size == 0 || self.appearance_channels == 0 || self.motion_channels == 0 {
            return bad("degenerate clip dimensions");
        }
        if self.clips_per_class < 2 {
            return bad("need at least 2 clips per class");
        }
        if !(0.0..1.0).contains(&self.val_fraction) || self.val_fraction == 0.0 {
            return bad("val_fraction must lie in (0, 1)");
        }
        if !(self.noise >= 0.0) || !(self.motion_noise >= 0.0) {
            return bad("noise levels must be non-negative");
        }
        Ok(())
    }
}

/// Clips stored back to back, channels last.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipSet {
    pub frames: usize,
    pub size: usize,
    pub appearance_channels: usize,
    pub motion_channels: usize,
    pub appearance: Vec<f64>,
    pub motion: Vec<f64>,
    pub labels: Vec<usize>,
}

impl ClipSet {
    fn empty(cfg: &DatasetConfig) -> Self {
        ClipSet {
            frames: cfg.frames,
            size: cfg.size,
            appearance_channels: cfg.appearance_channels,
            motion_channels: cfg.motion_channels,
            appearance: Vec::new(),
            motion: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn plane(&self) -> usize {
        self.frames * self.size * self.size
    }

    /// Stacks the listed clips into `[B,T,Y,X,C]` tensors plus labels.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor, Vec<usize>) {
        let (pa, pm) = (self.plane() * self.appearance_channels, self.plane() * self.motion_channels);
        let mut a = Vec::with_capacity(indices.len() * pa);
        let mut m = Vec::with_capacity(indices.len() * pm);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            a.extend_from_slice(&self.appearance[i * pa..(i + 1) * pa]);
            m.extend_from_slice(&self.motion[i * pm..(i + 1) * pm]);
            labels.push(self.labels[i]);
        }
        let dims = |c| vec![indices.len(), self.frames, self.size, self.size, c];
        (
            Tensor::new(dims(self.appearance_channels), a).expect("clip sizes"),
            Tensor::new(dims(self.motion_channels), m).expect("clip sizes"),
            labels,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxyDataset {
    pub config: DatasetConfig,
    pub train: ClipSet,
    pub val: ClipSet,
}

/// Per-pattern grating: orientation angle, spatial wavelength, colour.
fn pattern(g: usize, channels: usize) -> (f64, f64, Vec<f64>) {
    let angle = PI * g as f64 / 4.0 + 0.3 * (g / 4) as f64;
    let wavelength = 4.0 + (g % 3) as f64;
    let colour = (0..channels).map(|c| if (g + c) % channels == 0 { 1.0 } else { -0.5 }).collect();
    (angle, wavelength, colour)
}

fn clip<R: Rng>(cfg: &DatasetConfig, class: usize, rng: &mut R, out: &mut ClipSet) {
    let (g, j) = (class / cfg.periods, class % cfg.periods);
    let (angle, wavelength, colour) = pattern(g, cfg.appearance_channels);
    let phase = rng.random_range(0.0..2.0 * PI);
    let (cy, cx) = (angle.sin(), angle.cos());
    let half = 1usize << j;
    let offset = rng.random_range(0..2 * half);
    let direction: Vec<f64> = (0..cfg.motion_channels).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let mut noise = |std: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    };
    for t in 0..cfg.frames {
        let sign = if ((t + offset) / half) % 2 == 0 { 1.0 } else { -1.0 };
        for y in 0..cfg.size {
            for x in 0..cfg.size {
                let v = (2.0 * PI * (cy * y as f64 + cx * x as f64) / wavelength + phase).cos();
                for c in &colour {
                    out.appearance.push(c * v + noise(cfg.noise));
                }
                for d in &direction {
                    out.motion.push(sign * d + noise(cfg.motion_noise));
                }
            }
        }
    }
    out.labels.push(class);
}

/// Deterministic per seed. The split is stratified: the first
/// `val_fraction` of each class's clips go to validation.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<ProxyDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_val = ((cfg.clips_per_class as f64 * cfg.val_fraction).round() as usize).clamp(1, cfg.clips_per_class - 1);
    let mut order: Vec<(usize, bool)> = Vec::new();
    for class in 0..cfg.num_classes() {
        for i in 0..cfg.clips_per_class {
            order.push((class, i < n_val));
        }
    }
    order.shuffle(&mut rng);
    let (mut train, mut val) = (ClipSet::empty(cfg), ClipSet::empty(cfg));
    for (class, is_val) in order {
        clip(cfg, class, &mut rng, if is_val { &mut val } else { &mut train });
    }
    Ok(ProxyDataset { config: cfg.clone(), train, val })
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::DatasetFormat(format!("truncated file: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(|e| Error::DatasetFormat(format!("truncated file: {e}")))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

impl ProxyDataset {
    pub fn num_classes(&self) -> usize {
        self.config.num_classes()
    }

    /// Binary layout: magic, a little-endian u64 header (groups, periods,
    /// clips_per_class, frames, size, appearance channels, motion channels,
    /// seed, train count, val count), the two noise levels and the val fraction as f64,
    /// then for each split the labels (u64) followed by appearance and motion data (f64).
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let c = &self.config;
        let mut body = || -> std::io::Result<()> {
            w.write_all(MAGIC)?;
            for v in [c.groups, c.periods, c.clips_per_class, c.frames, c.size, c.appearance_channels, c.motion_channels] {
                put_u64(&mut w, v as u64)?;
            }
            put_u64(&mut w, c.seed)?;
            put_u64(&mut w, self.train.len() as u64)?;
            put_u64(&mut w, self.val.len() as u64)?;
            w.write_all(&c.noise.to_le_bytes())?;
            w.write_all(&c.motion_noise.to_le_bytes())?;
            w.write_all(&c.val_fraction.to_le_bytes())?;
            for set in [&self.train, &self.val] {
                for &l in &set.labels {
                    put_u64(&mut w, l as u64)?;
                }
                for v in set.appearance.iter().chain(&set.motion) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            w.flush()
        };
        body().map_err(io)
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = std::io::BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| Error::DatasetFormat(format!("truncated file: {e}")))?;
        if &magic != MAGIC {
            return Err(Error::DatasetFormat("bad magic".into()));
        }
        let mut h = [0usize; 7];
        for v in &mut h {
            *v = get_u64(&mut r)? as usize;
        }
        let seed = get_u64(&mut r)?;
        let (n_train, n_val) = (get_u64(&mut r)? as usize, get_u64(&mut r)? as usize);
        let extra = get_f64s(&mut r, 3)?;
        let cfg = DatasetConfig {
            groups: h[0],
            periods: h[1],
            clips_per_class: h[2],
            frames: h[3],
            size: h[4],
            appearance_channels: h[5],
            motion_channels: h[6],
            noise: extra[0],
            motion_noise: extra[1],
            val_fraction: extra[2],
            seed,
        };
        cfg.validate().map_err(|e| Error::DatasetFormat(e.to_string()))?;
        let plane = cfg.frames * cfg.size * cfg.size;
        let mut read_set = |n: usize| -> Result<ClipSet> {
            let mut set = ClipSet::empty(&cfg);
            for _ in 0..n {
                let l = get_u64(&mut r)? as usize;
                if l >= cfg.num_classes() {
                    return Err(Error::DatasetFormat(format!("label {l} out of range")));
                }
                set.labels.push(l);
            }
            set.appearance = get_f64s(&mut r, n * plane * cfg.appearance_channels)?;
            set.motion = get_f64s(&mut r, n * plane * cfg.motion_channels)?;
            Ok(set)
        };
        let train = read_set(n_train)?;
        let val = read_set(n_val)?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
        if !rest.is_empty() {
            return Err(Error::DatasetFormat(format!("{} trailing bytes", rest.len())));
        }
        Ok(ProxyDataset { config: cfg, train, val })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig { clips_per_class: 5, frames: 8, size: 8, ..DatasetConfig::default() }
    }

    #[test]
    fn factorial_classes_and_stratified_split() {
        let d = generate_dataset(&small()).unwrap();
        assert_eq!(d.num_classes(), 12);
        assert_eq!(d.val.len(), 12);
        assert_eq!(d.train.len(), 48);
        for c in 0..12 {
            assert_eq!(d.val.labels.iter().filter(|&&l| l == c).count(), 1);
        }
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate_dataset(&small()).unwrap(), generate_dataset(&small()).unwrap());
        let other = DatasetConfig { seed: 1, ..small() };
        assert_ne!(generate_dataset(&small()).unwrap().train.appearance, generate_dataset(&other).unwrap().train.appearance);
    }

    #[test]
    fn motion_sign_flips_with_the_period() {
        let cfg = DatasetConfig { noise: 0.0, motion_noise: 0.0, ..small() };
        let d = generate_dataset(&cfg).unwrap();
        let plane = 8 * 8 * 2;
        for (i, &label) in d.train.labels.iter().enumerate() {
            let half = 1usize << (label % 3);
            let clip = &d.train.motion[i * 8 * plane..(i + 1) * 8 * plane];
            let flips = (1..8).filter(|&t| clip[t * plane] != clip[(t - 1) * plane]).count();
            assert!(flips >= 8 / half - 1 && flips <= 8 / half, "label {label}: {flips} flips");
        }
    }

    #[test]
    fn too_few_classes_rejected() {
        let cfg = DatasetConfig { groups: 1, periods: 3, ..small() };
        assert!(generate_dataset(&cfg).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let d = generate_dataset(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        d.write_to(&path).unwrap();
        assert_eq!(ProxyDataset::read_from(&path).unwrap(), d);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(ProxyDataset::read_from(&path), Err(Error::DatasetFormat(_))));
    }
}

//! Block-brightness abstraction of images and classifier density analysis.
//!
//! An image is cut into `(h/bh)·(w/bw)` blocks; a block is bright when its mean
//! pixel value exceeds the threshold. The cell id is the bit vector of block
//! flags, first block in the most significant bit. Concretization draws
//! block-constant images (`dark_value` / `bright_value`), so every cell has a
//! single representative and re-abstracts to itself.

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::{sample_cell, Partition};
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::network::{Dense, Layer, Matrix, Network};
use crate::operator::{LinearOperator, Role};
use crate::scalar::Scalar;
use crate::transformer::{AbstractTransformer, Provenance};

pub const DEFAULT_CELL_CAP: usize = 1 << 20;

fn default_bright() -> u8 {
    255
}

fn default_cap() -> usize {
    DEFAULT_CELL_CAP
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageAbstractionConfig {
    pub image_shape: [usize; 2],
    pub block_shape: [usize; 2],
    pub brightness_threshold: u8,
    #[serde(default)]
    pub dark_value: u8,
    #[serde(default = "default_bright")]
    pub bright_value: u8,
    #[serde(default = "default_cap")]
    pub cell_cap: usize,
    /// Factor applied to pixel values before they enter the network.
    #[serde(default = "default_scale")]
    pub input_scale: f64,
}

impl ImageAbstractionConfig {
    pub fn new(
        image_shape: [usize; 2],
        block_shape: [usize; 2],
        brightness_threshold: u8,
    ) -> Result<Self> {
        let cfg = ImageAbstractionConfig {
            image_shape,
            block_shape,
            brightness_threshold,
            dark_value: 0,
            bright_value: default_bright(),
            cell_cap: DEFAULT_CELL_CAP,
            input_scale: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &[u8]) -> Result<Self> {
        let cfg: ImageAbstractionConfig = serde_json::from_slice(text).map_err(|e| {
            Error::parse(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.image_shape;
        let [bh, bw] = self.block_shape;
        if h == 0 || w == 0 || bh == 0 || bw == 0 || h % bh != 0 || w % bw != 0 {
            return Err(Error::Config(format!(
                "block shape {bh}x{bw} must divide image shape {h}x{w}"
            )));
        }
        if !(self.dark_value <= self.brightness_threshold
            && self.brightness_threshold < self.bright_value)
        {
            return Err(Error::Config(format!(
                "need dark_value <= brightness_threshold < bright_value, got {} / {} / {}",
                self.dark_value, self.brightness_threshold, self.bright_value
            )));
        }
        if !self.input_scale.is_finite() {
            return Err(Error::Config("input_scale must be finite".into()));
        }
        let groups = self.groups();
        if groups >= usize::BITS as usize || (1usize << groups) > self.cell_cap {
            return Err(Error::Config(format!(
                "2^{groups} cells exceed the cap of {}",
                self.cell_cap
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.image_shape[0] * self.image_shape[1]
    }

    pub fn groups(&self) -> usize {
        (self.image_shape[0] / self.block_shape[0]) * (self.image_shape[1] / self.block_shape[1])
    }

    pub fn cell_count(&self) -> usize {
        1 << self.groups()
    }

    /// Flattened pixel positions of block `b`, row-major.
    fn block_pixels(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        let [_, w] = self.image_shape;
        let [bh, bw] = self.block_shape;
        let per_row = w / bw;
        let (br, bc) = (b / per_row, b % per_row);
        (0..bh).flat_map(move |r| (0..bw).map(move |c| (br * bh + r) * w + bc * bw + c))
    }

    /// Whether block `b` is bright in `cell`.
    pub fn block_is_bright(&self, cell: usize, b: usize) -> bool {
        (cell >> (self.groups() - 1 - b)) & 1 == 1
    }
}

/// Cell id of an image.
pub fn abstract_image(img: &[u8], cfg: &ImageAbstractionConfig) -> Result<usize> {
    if img.len() != cfg.pixels() {
        return Err(Error::DimensionMismatch {
            context: "image pixels",
            expected: cfg.pixels(),
            found: img.len(),
        });
    }
    let block_size = (cfg.block_shape[0] * cfg.block_shape[1]) as u64;
    let limit = u64::from(cfg.brightness_threshold) * block_size;
    Ok((0..cfg.groups()).fold(0usize, |cell, b| {
        let sum: u64 = cfg.block_pixels(b).map(|i| u64::from(img[i])).sum();
        (cell << 1) | usize::from(sum > limit)
    }))
}

/// The block-constant representative of `cell`.
pub fn concretize(cell: usize, cfg: &ImageAbstractionConfig) -> Vec<u8> {
    let mut img = vec![cfg.dark_value; cfg.pixels()];
    for b in 0..cfg.groups() {
        if cfg.block_is_bright(cell, b) {
            for i in cfg.block_pixels(b) {
                img[i] = cfg.bright_value;
            }
        }
    }
    img
}

/// Empirical cell frequencies of a dataset.
pub fn init_distribution<'a, S: Scalar>(
    images: impl IntoIterator<Item = &'a [u8]>,
    cfg: &ImageAbstractionConfig,
) -> Result<Distribution<S>> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n = 0usize;
    for img in images {
        *counts.entry(abstract_image(img, cfg)?).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidDistribution("dataset has no images".into()));
    }
    let total = S::from_count(n);
    Distribution::new(
        cfg.cell_count(),
        counts
            .into_iter()
            .map(|(c, k)| (c, S::from_count(k) / total.clone())),
    )
}

/// Labelled images from a digit-recognizer style CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub labels: Vec<u8>,
    pub images: Vec<Vec<u8>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Reads `label,pixel0,...,pixelN` rows; the pixel count comes from the header.
pub fn read_mnist_csv(reader: impl Read) -> Result<Dataset> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::parse("header", "first column must be `label`"));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("pixel{i}") {
            return Err(Error::parse(
                "header",
                format!("column {} is `{name}`, expected `pixel{i}`", i + 1),
            ));
        }
    }
    let width = header.len() - 1;
    let mut data = Dataset {
        labels: Vec::new(),
        images: Vec::new(),
    };
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        let at = |col: usize| format!("row {} column {}", line + 2, col + 1);
        if record.len() != width + 1 {
            return Err(Error::parse(
                at(record.len()),
                format!("expected {} fields", width + 1),
            ));
        }
        let value = |col: usize| -> Result<u8> {
            record[col].trim().parse::<u8>().map_err(|_| {
                Error::parse(
                    at(col),
                    format!("`{}` is not a value in 0..=255", &record[col]),
                )
            })
        };
        data.labels.push(value(0)?);
        data.images
            .push((1..=width).map(value).collect::<Result<_>>()?);
    }
    Ok(data)
}

/// Index of the largest score; ties go to the lowest class.
pub fn argmax(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |best, (i, &s)| {
            if s > best.1 {
                (i, s)
            } else {
                best
            }
        })
        .0
}

fn classify(net: &Network<f64>, img: &[u8], cfg: &ImageAbstractionConfig) -> Result<usize> {
    let x: Vec<f64> = img
        .iter()
        .map(|p| f64::from(*p) * cfg.input_scale)
        .collect();
    Ok(argmax(&net.eval(&x)?))
}

fn check_network(net: &Network<f64>, cfg: &ImageAbstractionConfig) -> Result<()> {
    if net.input_width() != cfg.pixels() {
        return Err(Error::DimensionMismatch {
            context: "network input width vs image pixels",
            expected: cfg.pixels(),
            found: net.input_width(),
        });
    }
    Ok(())
}

/// Cells and classes as partitions: one state per block-constant image and
/// one per class.
pub fn classifier_partitions(
    net: &Network<f64>,
    cfg: &ImageAbstractionConfig,
) -> Result<(Arc<Partition>, Arc<Partition>)> {
    check_network(net, cfg)?;
    let cells = Arc::new(Partition::bits(cfg.groups() as u32)?);
    let classes = Arc::new(Partition::identity(net.output_width())?);
    Ok((cells, classes))
}

/// Cell-to-class transformer computed from every member of the listed cells.
/// Columns of cells not listed are left zero.
pub fn exact_classifier_transformer<S: Scalar>(
    net: &Network<f64>,
    cfg: &ImageAbstractionConfig,
    cells: &[usize],
) -> Result<AbstractTransformer<S>> {
    let (input, output) = classifier_partitions(net, cfg)?;
    let columns = cells
        .par_iter()
        .map(|&cell| {
            let members = input.members(cell);
            let weight = S::one() / S::from_count(members.len());
            members
                .iter()
                .map(|&m| {
                    Ok((
                        classify(net, &concretize(m, cfg), cfg)?,
                        cell,
                        weight.clone(),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let op = LinearOperator::new(
        output.cell_count(),
        input.cell_count(),
        Role::Transformer,
        columns.into_iter().flatten(),
    )?;
    AbstractTransformer::new(op, input, output, Provenance::Exact)
}

/// Monte Carlo cell-to-class transformer: `k` draws per listed cell. Each
/// distinct drawn image is evaluated once.
pub fn sampled_classifier_transformer<S: Scalar>(
    net: &Network<f64>,
    cfg: &ImageAbstractionConfig,
    cells: &[usize],
    k: usize,
    seed: u64,
) -> Result<AbstractTransformer<S>> {
    let (input, output) = classifier_partitions(net, cfg)?;
    let weight = S::one() / S::from_count(k);
    let columns = cells
        .par_iter()
        .map(|&cell| {
            let mut draws: BTreeMap<usize, usize> = BTreeMap::new();
            for m in sample_cell(&input, cell, k, seed)? {
                *draws.entry(m).or_default() += 1;
            }
            draws
                .into_iter()
                .map(|(m, times)| {
                    let class = classify(net, &concretize(m, cfg), cfg)?;
                    Ok((class, cell, weight.clone() * S::from_count(times)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let op = LinearOperator::new(
        output.cell_count(),
        input.cell_count(),
        Role::Transformer,
        columns.into_iter().flatten(),
    )?;
    AbstractTransformer::new(op, input, output, Provenance::Sampled { k, seed })
}

/// Mass of one cell and where it goes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellContribution {
    pub cell: usize,
    pub label: String,
    pub mass: f64,
    /// Class frequencies among the cell's samples.
    pub classes: Vec<f64>,
}

/// Class distribution given that one block is bright.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEffect {
    pub block: usize,
    /// Probability that the block is bright.
    pub mass: f64,
    /// Class distribution conditioned on the block being bright; empty when
    /// the block is never bright.
    pub classes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassifierAnalysis {
    pub classes: Distribution<f64>,
    pub contributions: Vec<CellContribution>,
    pub block_effects: Vec<BlockEffect>,
    pub provenance: Provenance,
}

/// Pushes a cell distribution through the classifier with `k` samples per
/// support cell.
pub fn analyze_classifier(
    net: &Network<f64>,
    d: &Distribution<f64>,
    cfg: &ImageAbstractionConfig,
    k: usize,
    seed: u64,
) -> Result<ClassifierAnalysis> {
    if d.domain_size() != cfg.cell_count() {
        return Err(Error::DimensionMismatch {
            context: "cell distribution",
            expected: cfg.cell_count(),
            found: d.domain_size(),
        });
    }
    let support: Vec<usize> = d.iter().map(|(c, _)| c).collect();
    let t = sampled_classifier_transformer::<f64>(net, cfg, &support, k, seed)?;
    let classes = t.apply(d)?;
    let n_classes = net.output_width();
    let mut columns: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (r, c, v) in t.operator().entries() {
        columns.entry(*c).or_insert_with(|| vec![0.0; n_classes])[*r] += v;
    }
    let contributions: Vec<CellContribution> = d
        .iter()
        .map(|(c, p)| CellContribution {
            cell: c,
            label: t.input().label(c),
            mass: *p,
            classes: columns.remove(&c).unwrap_or_else(|| vec![0.0; n_classes]),
        })
        .collect();
    let block_effects = (0..cfg.groups())
        .map(|b| {
            let mut mass = 0.0;
            let mut acc = vec![0.0; n_classes];
            for cc in contributions
                .iter()
                .filter(|cc| cfg.block_is_bright(cc.cell, b))
            {
                mass += cc.mass;
                for (a, f) in acc.iter_mut().zip(&cc.classes) {
                    *a += cc.mass * f;
                }
            }
            let classes = if mass > 0.0 {
                acc.iter().map(|a| a / mass).collect()
            } else {
                Vec::new()
            };
            BlockEffect {
                block: b,
                mass,
                classes,
            }
        })
        .collect();
    Ok(ClassifierAnalysis {
        classes,
        contributions,
        block_effects,
        provenance: t.provenance(),
    })
}

/// Nearest-centroid linear classifier fitted in closed form: the score of
/// class `c` is `μ_c·x − |μ_c|²/2` on scaled pixels. A stand-in for a trained
/// network.
pub fn fit_centroid_classifier(
    data: &Dataset,
    cfg: &ImageAbstractionConfig,
    classes: usize,
) -> Result<Network<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidDistribution("dataset has no images".into()));
    }
    let n = cfg.pixels();
    let mut sums = vec![vec![0.0f64; n]; classes];
    let mut counts = vec![0usize; classes];
    for (label, img) in data.labels.iter().zip(&data.images) {
        let c = usize::from(*label);
        if c >= classes {
            return Err(Error::Config(format!(
                "label {c} outside {classes} classes"
            )));
        }
        if img.len() != n {
            return Err(Error::DimensionMismatch {
                context: "image pixels",
                expected: n,
                found: img.len(),
            });
        }
        counts[c] += 1;
        for (s, p) in sums[c].iter_mut().zip(img) {
            *s += f64::from(*p) * cfg.input_scale;
        }
    }
    let mut weights = Vec::with_capacity(classes);
    let mut bias = Vec::with_capacity(classes);
    for (s, &k) in sums.iter().zip(&counts) {
        if k == 0 {
            // unseen classes never win
            weights.push(vec![0.0; n]);
            bias.push(f64::MIN);
            continue;
        }
        let mu: Vec<f64> = s.iter().map(|v| v / k as f64).collect();
        bias.push(-0.5 * mu.iter().map(|m| m * m).sum::<f64>());
        weights.push(mu);
    }
    Network::new(vec![Layer::Dense(Dense::new(
        Matrix::from_rows(weights)?,
        bias,
    )?)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mnist_cfg() -> ImageAbstractionConfig {
        ImageAbstractionConfig::new([28, 28], [7, 7], 127).unwrap()
    }

    fn toy_cfg() -> ImageAbstractionConfig {
        let mut cfg = ImageAbstractionConfig::new([8, 8], [4, 4], 127).unwrap();
        cfg.input_scale = 1.0 / 255.0;
        cfg
    }

    /// Class 1 iff block 0 is bright.
    fn block_zero_net(cfg: &ImageAbstractionConfig) -> Network<f64> {
        let mut bright = vec![0.0; cfg.pixels()];
        for i in cfg.block_pixels(0) {
            bright[i] = 1.0 / 16.0;
        }
        Network::new(vec![Layer::Dense(
            Dense::new(
                Matrix::from_rows(vec![vec![0.0; cfg.pixels()], bright]).unwrap(),
                vec![0.5, 0.0],
            )
            .unwrap(),
        )])
        .unwrap()
    }

    #[test]
    fn extreme_images() {
        let cfg = mnist_cfg();
        assert_eq!(cfg.groups(), 16);
        assert_eq!(abstract_image(&[0; 784], &cfg).unwrap(), 0);
        assert_eq!(abstract_image(&[255; 784], &cfg).unwrap(), (1 << 16) - 1);
        let mut corner = vec![0u8; 784];
        for r in 0..7 {
            for c in 0..7 {
                corner[r * 28 + c] = 255;
            }
        }
        assert_eq!(abstract_image(&corner, &cfg).unwrap(), 1 << 15);
        assert!(abstract_image(&[0; 783], &cfg).is_err());
    }

    #[test]
    fn mean_thresholding() {
        let cfg = ImageAbstractionConfig::new([2, 2], [2, 2], 127).unwrap();
        // mean 127 is not above the threshold, 127.25 is
        assert_eq!(abstract_image(&[127, 127, 127, 127], &cfg).unwrap(), 0);
        assert_eq!(abstract_image(&[128, 127, 127, 127], &cfg).unwrap(), 1);
        assert_eq!(abstract_image(&[255, 255, 0, 0], &cfg).unwrap(), 1);
    }

    #[test]
    fn representatives_reabstract_to_their_cell() {
        let cfg = toy_cfg();
        for cell in 0..16 {
            assert_eq!(abstract_image(&concretize(cell, &cfg), &cfg).unwrap(), cell);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ImageAbstractionConfig::new([28, 28], [5, 7], 127).is_err());
        let mut cfg = mnist_cfg();
        cfg.cell_cap = 1 << 15;
        assert!(cfg.validate().is_err());
        assert!(ImageAbstractionConfig::new([8, 8], [4, 4], 255).is_err());
        let parsed = ImageAbstractionConfig::from_json(
            br#"{"image_shape": [8, 8], "block_shape": [4, 4], "brightness_threshold": 127}"#,
        )
        .unwrap();
        assert_eq!(parsed.bright_value, 255);
        assert!(ImageAbstractionConfig::from_json(br#"{"image_shape": [8, 8]}"#).is_err());
    }

    #[test]
    fn empirical_cell_frequencies() {
        let cfg = toy_cfg();
        let a = concretize(3, &cfg);
        let b = concretize(12, &cfg);
        let one = init_distribution::<f64>([a.as_slice()], &cfg).unwrap();
        assert_eq!(one, Distribution::point_mass(16, 3).unwrap());
        let images = [a.as_slice(), a.as_slice(), b.as_slice(), b.as_slice()];
        let half = init_distribution::<f64>(images, &cfg).unwrap();
        assert_eq!(half.get(3), 0.5);
        assert_eq!(half.get(12), 0.5);
        assert!(init_distribution::<f64>(std::iter::empty(), &cfg).is_err());
    }

    #[test]
    fn csv_reading() {
        let text = "label,pixel0,pixel1,pixel2,pixel3\n3,0,255,12,0\n7,1,2,3,4\n";
        let data = read_mnist_csv(text.as_bytes()).unwrap();
        assert_eq!(data.labels, vec![3, 7]);
        assert_eq!(data.images[0], vec![0, 255, 12, 0]);
        assert!(read_mnist_csv("label,pixel0\n1,256\n".as_bytes()).is_err());
        assert!(read_mnist_csv("digit,pixel0\n1,2\n".as_bytes()).is_err());
        assert!(read_mnist_csv("label,pixel1\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn bright_first_block_is_class_one() {
        let cfg = toy_cfg();
        let net = block_zero_net(&cfg);
        let d = Distribution::point_mass(16, 0b1010).unwrap();
        let out = analyze_classifier(&net, &d, &cfg, 8, 0).unwrap();
        assert_eq!(out.classes.to_dense(), vec![0.0, 1.0]);
        let d = Distribution::point_mass(16, 0b0110).unwrap();
        let out = analyze_classifier(&net, &d, &cfg, 1, 0).unwrap();
        assert_eq!(out.classes.to_dense(), vec![1.0, 0.0]);
        assert_eq!(out.contributions[0].label, "0110");
        assert!(out.block_effects[0].classes.is_empty());
        assert_eq!(out.block_effects[1].classes, vec![1.0, 0.0]);
    }

    #[test]
    fn sampled_and_exact_transformers_agree_on_the_toy() {
        let cfg = toy_cfg();
        let net = block_zero_net(&cfg);
        let all: Vec<usize> = (0..16).collect();
        let exact = exact_classifier_transformer::<f64>(&net, &cfg, &all).unwrap();
        let sampled = sampled_classifier_transformer::<f64>(&net, &cfg, &all, 512, 9).unwrap();
        assert!(exact.operator().approx_eq(sampled.operator()));
    }

    #[test]
    fn argmax_prefers_the_lowest_tie() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn centroid_classifier_separates_two_blobs() {
        let cfg = toy_cfg();
        let data = Dataset {
            labels: vec![0, 1, 0, 1],
            images: vec![
                concretize(0b1000, &cfg),
                concretize(0b0001, &cfg),
                concretize(0b1100, &cfg),
                concretize(0b0011, &cfg),
            ],
        };
        let net = fit_centroid_classifier(&data, &cfg, 2).unwrap();
        assert_eq!(classify(&net, &concretize(0b1000, &cfg), &cfg).unwrap(), 0);
        assert_eq!(classify(&net, &concretize(0b0001, &cfg), &cfg).unwrap(), 1);
    }
}

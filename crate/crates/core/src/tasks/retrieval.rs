//! Caption-image retrieval: two linear maps into a joint space trained with a
//! bidirectional margin ranking loss over in-batch negatives.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{encode_first, EvalSettings, TargetSpec};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::ingest::{ImageFeatureStore, Record, Target, TaskData};
use crate::metrics::{median_rank, recall_from_ranks, retrieval_ranks};
use crate::numerics::{dot, norm, seeded_rng, Matrix, Optimizer, OptimizerKind};

const TAG_INIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_PARTITION: u64 = 3;
const RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub joint_dim: usize,
    pub margin: f64,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without dev improvement before stopping.
    pub tenacity: usize,
    pub max_epochs: usize,
    /// Number of random image splits the test set is scored on.
    pub n_splits: usize,
    pub seed: u64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            joint_dim: 512,
            margin: 0.2,
            batch_size: 128,
            lr: 0.001,
            tenacity: 5,
            max_epochs: 50,
            n_splits: 5,
            seed: 1111,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("retrieval config: {msg}")));
        if self.joint_dim == 0 {
            return bad("joint_dim must be positive");
        }
        if self.margin.is_nan() || self.margin <= 0.0 {
            return bad("margin must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return bad("lr must be positive");
        }
        if self.tenacity == 0 || self.max_epochs == 0 {
            return bad("tenacity and max_epochs must be positive");
        }
        if self.n_splits == 0 {
            return bad("n_splits must be positive");
        }
        Ok(())
    }
}

/// Caption embeddings aligned with image features. Several captions may
/// share one image.
#[derive(Debug, Clone)]
pub struct RetrievalData {
    pub captions: Matrix,
    pub images: Matrix,
    /// Row of `images` described by each caption.
    pub caption_image: Vec<usize>,
}

impl RetrievalData {
    pub fn new(captions: Matrix, images: Matrix, caption_image: Vec<usize>) -> Result<Self> {
        if captions.rows() != caption_image.len() {
            return Err(Error::shape(
                "retrieval captions",
                captions.rows(),
                caption_image.len(),
            ));
        }
        if let Some(&bad) = caption_image.iter().find(|&&i| i >= images.rows()) {
            return Err(Error::InvalidArgument(format!(
                "caption refers to image {bad}, only {} images",
                images.rows()
            )));
        }
        Ok(RetrievalData {
            captions,
            images,
            caption_image,
        })
    }

    /// One caption per image, caption `i` describing image `i`.
    pub fn paired(captions: Matrix, images: Matrix) -> Result<Self> {
        let n = captions.rows();
        Self::new(captions, images, (0..n).collect())
    }

    fn n_images(&self) -> usize {
        self.images.rows()
    }

    fn captions_of(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_images()];
        for (c, &img) in self.caption_image.iter().enumerate() {
            out[img].push(c);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalModel {
    /// joint_dim × caption dim
    pub caption_proj: Matrix,
    /// joint_dim × image dim
    pub image_proj: Matrix,
    pub margin: f64,
}

impl RetrievalModel {
    /// Uniform ±1/√fan_in initialization.
    pub fn init(
        caption_dim: usize,
        image_dim: usize,
        joint_dim: usize,
        margin: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut uniform = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
        };
        let caption_proj = uniform(joint_dim, caption_dim);
        let image_proj = uniform(joint_dim, image_dim);
        RetrievalModel {
            caption_proj,
            image_proj,
            margin,
        }
    }

    /// Both maps are the identity on a shared space of dimension `dim`.
    pub fn identity(dim: usize, margin: f64) -> Self {
        RetrievalModel {
            caption_proj: Matrix::identity(dim),
            image_proj: Matrix::identity(dim),
            margin,
        }
    }

    pub fn embed_captions(&self, captions: &Matrix) -> Result<Matrix> {
        captions.matmul_nt(&self.caption_proj)
    }

    pub fn embed_images(&self, images: &Matrix) -> Result<Matrix> {
        images.matmul_nt(&self.image_proj)
    }

    /// Cosine similarities, captions × images.
    pub fn similarity(&self, captions: &Matrix, images: &Matrix) -> Result<Matrix> {
        let (a, _) = normalize_rows(&self.embed_captions(captions)?);
        let (b, _) = normalize_rows(&self.embed_images(images)?);
        a.matmul_nt(&b)
    }
}

fn normalize_rows(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let n = norm(m.row(i)).max(f64::MIN_POSITIVE);
        out.row_mut(i).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    (out, norms)
}

/// `max(0, margin − positive + negative)`.
pub fn hinge(margin: f64, positive: f64, negative: f64) -> f64 {
    (margin - positive + negative).max(0.0)
}

/// Gradient through row normalization: `(g − (g·â)â) / ‖a‖` per row.
fn backprop_normalize(grad_unit: &Matrix, unit: &Matrix, norms: &[f64]) -> Matrix {
    let mut out = grad_unit.clone();
    for (i, &n) in norms.iter().enumerate() {
        let u = unit.row(i);
        let proj = dot(grad_unit.row(i), u);
        for (g, &uj) in out.row_mut(i).iter_mut().zip(u) {
            *g = (*g - proj * uj) / n;
        }
    }
    out
}

/// Summed bidirectional hinge loss over a batch of `(caption i, image i)`
/// pairs. Rows that share a `groups` id (captions of the same image) are not
/// used as each other's negatives. Returns the loss and its gradients with
/// respect to the caption and image projections.
pub fn ranking_loss(
    model: &RetrievalModel,
    captions: &Matrix,
    images: &Matrix,
    groups: &[usize],
) -> Result<(f64, Matrix, Matrix)> {
    let n = captions.rows();
    if images.rows() != n || groups.len() != n {
        return Err(Error::shape(
            "ranking_loss batch",
            n,
            format!("{} images, {} groups", images.rows(), groups.len()),
        ));
    }
    if n < 2 || groups.iter().all(|&g| g == groups[0]) {
        return Err(Error::InvalidArgument(
            "ranking loss needs at least two distinct images in a batch".into(),
        ));
    }
    let a = model.embed_captions(captions)?;
    let b = model.embed_images(images)?;
    let (a_unit, a_norms) = normalize_rows(&a);
    let (b_unit, b_norms) = normalize_rows(&b);
    let s = a_unit.matmul_nt(&b_unit)?;

    let alpha = model.margin;
    let mut loss = 0.0;
    let mut ds = Matrix::zeros(n, n);
    for i in 0..n {
        let pos = s.get(i, i);
        for k in 0..n {
            if groups[k] == groups[i] {
                continue;
            }
            // image i against contrastive caption k
            let h = hinge(alpha, pos, s.get(k, i));
            if h > 0.0 {
                loss += h;
                ds.set(i, i, ds.get(i, i) - 1.0);
                ds.set(k, i, ds.get(k, i) + 1.0);
            }
            // caption i against contrastive image k
            let h = hinge(alpha, pos, s.get(i, k));
            if h > 0.0 {
                loss += h;
                ds.set(i, i, ds.get(i, i) - 1.0);
                ds.set(i, k, ds.get(i, k) + 1.0);
            }
        }
    }

    let da_unit = ds.matmul(&b_unit)?;
    let db_unit = ds.matmul_tn(&a_unit)?;
    let da = backprop_normalize(&da_unit, &a_unit, &a_norms);
    let db = backprop_normalize(&db_unit, &b_unit, &b_norms);
    Ok((loss, da.matmul_tn(captions)?, db.matmul_tn(images)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScores {
    /// `None` when the split has fewer candidates than K.
    pub r1: Option<f64>,
    pub r5: Option<f64>,
    pub r10: Option<f64>,
    pub medr: f64,
}

impl RetrievalScores {
    fn from_ranks(ranks: &[usize], candidates: usize) -> Result<Self> {
        let recall = |k: usize| -> Result<Option<f64>> {
            if k > candidates {
                Ok(None)
            } else {
                recall_from_ranks(ranks, k).map(Some)
            }
        };
        Ok(RetrievalScores {
            r1: recall(RECALL_KS[0])?,
            r5: recall(RECALL_KS[1])?,
            r10: recall(RECALL_KS[2])?,
            medr: median_rank(ranks)?,
        })
    }

    fn mean(all: &[RetrievalScores]) -> RetrievalScores {
        let n = all.len() as f64;
        let mean_opt = |f: fn(&RetrievalScores) -> Option<f64>| -> Option<f64> {
            all.iter().map(f).sum::<Option<f64>>().map(|s| s / n)
        };
        RetrievalScores {
            r1: mean_opt(|s| s.r1),
            r5: mean_opt(|s| s.r5),
            r10: mean_opt(|s| s.r10),
            medr: all.iter().map(|s| s.medr).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSplitScores {
    pub n_images: usize,
    pub n_captions: usize,
    /// Caption query, images as candidates.
    pub image_retrieval: RetrievalScores,
    /// Image query, captions as candidates; the best-ranked correct caption counts.
    pub caption_retrieval: RetrievalScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    /// Best dev R@1 (caption→image) + R@1 (image→caption).
    pub dev_r1_sum: f64,
    pub epochs_run: usize,
    pub splits: Vec<RetrievalSplitScores>,
    pub mean: RetrievalSplitScores,
}

/// Seeded partition of `0..n` into `n_splits` parts whose sizes differ by at most one.
pub fn partition_images(n: usize, n_splits: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_splits == 0 || n_splits > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} images into {n_splits} sets"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, &[TAG_PARTITION]));
    let base = n / n_splits;
    let extra = n % n_splits;
    let mut parts = Vec::with_capacity(n_splits);
    let mut start = 0;
    for s in 0..n_splits {
        let len = base + usize::from(s < extra);
        let mut part = order[start..start + len].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += len;
    }
    Ok(parts)
}

fn score_subset(
    model: &RetrievalModel,
    data: &RetrievalData,
    images: &[usize],
) -> Result<RetrievalSplitScores> {
    let local: HashMap<usize, usize> = images.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let mut caption_rows = Vec::new();
    let mut caption_local_image = Vec::new();
    for (c, img) in data.caption_image.iter().enumerate() {
        if let Some(&l) = local.get(img) {
            caption_rows.push(c);
            caption_local_image.push(l);
        }
    }
    let sim = model.similarity(
        &data.captions.select_rows(&caption_rows),
        &data.images.select_rows(images),
    )?;

    let image_answers: Vec<Vec<usize>> = caption_local_image.iter().map(|&l| vec![l]).collect();
    let image_ranks = retrieval_ranks(&sim, &image_answers)?;

    let mut caption_answers = vec![Vec::new(); images.len()];
    for (c, &l) in caption_local_image.iter().enumerate() {
        caption_answers[l].push(c);
    }
    let caption_ranks = retrieval_ranks(&sim.transpose(), &caption_answers)?;

    Ok(RetrievalSplitScores {
        n_images: images.len(),
        n_captions: caption_rows.len(),
        image_retrieval: RetrievalScores::from_ranks(&image_ranks, images.len())?,
        caption_retrieval: RetrievalScores::from_ranks(&caption_ranks, caption_rows.len())?,
    })
}

/// Scores `data` on `n_splits` seeded image partitions and their mean.
pub fn evaluate_retrieval(
    model: &RetrievalModel,
    data: &RetrievalData,
    n_splits: usize,
    seed: u64,
) -> Result<(Vec<RetrievalSplitScores>, RetrievalSplitScores)> {
    if data.captions_of().iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument(
            "every image needs at least one caption".into(),
        ));
    }
    let parts = partition_images(data.n_images(), n_splits, seed)?;
    let splits = parts
        .iter()
        .map(|images| score_subset(model, data, images))
        .collect::<Result<Vec<_>>>()?;
    let image: Vec<_> = splits.iter().map(|s| s.image_retrieval).collect();
    let caption: Vec<_> = splits.iter().map(|s| s.caption_retrieval).collect();
    let mean = RetrievalSplitScores {
        n_images: data.n_images(),
        n_captions: data.captions.rows(),
        image_retrieval: RetrievalScores::mean(&image),
        caption_retrieval: RetrievalScores::mean(&caption),
    };
    Ok((splits, mean))
}

fn dev_r1_sum(model: &RetrievalModel, dev: &RetrievalData) -> Result<f64> {
    let all: Vec<usize> = (0..dev.n_images()).collect();
    let s = score_subset(model, dev, &all)?;
    Ok(s.image_retrieval.r1.unwrap_or(0.0) + s.caption_retrieval.r1.unwrap_or(0.0))
}

#[derive(Debug, Clone)]
pub struct TrainedRetrieval {
    pub model: RetrievalModel,
    pub dev_r1_sum: f64,
    pub epochs_run: usize,
}

/// Adam on both projections; keeps the snapshot with the best dev R@1 sum
/// and stops after `tenacity` epochs without improvement.
pub fn train_retrieval(
    config: &RetrievalConfig,
    train: &RetrievalData,
    dev: &RetrievalData,
) -> Result<TrainedRetrieval> {
    config.validate()?;
    if train.captions.rows() < 2 || train.n_images() < 2 {
        return Err(Error::EmptyInput("retrieval training split"));
    }
    let mut model = RetrievalModel::init(
        train.captions.cols(),
        train.images.cols(),
        config.joint_dim,
        config.margin,
        &mut seeded_rng(config.seed, &[TAG_INIT]),
    );
    let mut opt_u = Optimizer::for_params(OptimizerKind::Adam, &model.caption_proj, config.lr);
    let mut opt_v = Optimizer::for_params(OptimizerKind::Adam, &model.image_proj, config.lr);
    let mut rng = seeded_rng(config.seed, &[TAG_SHUFFLE]);

    let mut best = (dev_r1_sum(&model, dev)?, model.clone());
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..train.captions.rows()).collect();
    while epochs_run < config.max_epochs && stale < config.tenacity {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let groups: Vec<usize> = batch.iter().map(|&c| train.caption_image[c]).collect();
            if groups.iter().all(|&g| g == groups[0]) {
                continue;
            }
            let captions = train.captions.select_rows(batch);
            let images = train.images.select_rows(&groups);
            let (loss, du, dv) = ranking_loss(&model, &captions, &images, &groups)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { lambda: 0.0 });
            }
            epoch_loss += loss;
            opt_u.step(&mut model.caption_proj, &du)?;
            opt_v.step(&mut model.image_proj, &dv)?;
        }
        epochs_run += 1;
        let score = dev_r1_sum(&model, dev)?;
        log::debug!("retrieval epoch {epochs_run}: loss {epoch_loss:.4}, dev R@1 sum {score:.4}");
        if score > best.0 {
            best = (score, model.clone());
            stale = 0;
        } else {
            stale += 1;
        }
    }
    Ok(TrainedRetrieval {
        model: best.1,
        dev_r1_sum: best.0,
        epochs_run,
    })
}

fn retrieval_split(
    records: &[Record],
    store: &ImageFeatureStore,
    encoder: &mut dyn Encoder,
    settings: &EvalSettings,
) -> Result<RetrievalData> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut rows: Vec<&[f64]> = Vec::new();
    let mut caption_image = Vec::with_capacity(records.len());
    for r in records {
        let Target::Image(id) = &r.target else {
            return Err(Error::InvalidArgument(
                "caption record without an image id".into(),
            ));
        };
        let next = rows.len();
        let i = *index.entry(id.as_str()).or_insert(next);
        if i == next {
            rows.push(store.get(id).ok_or_else(|| {
                Error::InvalidArgument(format!("no image features for image {id}"))
            })?);
        }
        caption_image.push(i);
    }
    let images = Matrix::from_rows(&rows)?;
    let captions = encode_first(encoder, records, settings)?;
    RetrievalData::new(captions, images, caption_image)
}

/// COCO-style caption-image retrieval.
pub fn run_caption_retrieval(
    data: &TaskData,
    encoder: &mut dyn Encoder,
    settings: &EvalSettings,
) -> Result<RetrievalResult> {
    let store = data.images.as_ref().ok_or_else(|| {
        Error::InvalidArgument(format!("{}: missing image features", data.spec.name))
    })?;
    if let TargetSpec::ImageIds { feature_dim } = data.spec.target {
        if store.dim() != feature_dim {
            return Err(Error::shape(
                "image features",
                format!("dim {feature_dim}"),
                format!("dim {}", store.dim()),
            ));
        }
    }
    let train = retrieval_split(data.split("train")?, store, encoder, settings)?;
    let dev = retrieval_split(data.split("dev")?, store, encoder, settings)?;
    let test = retrieval_split(data.split("test")?, store, encoder, settings)?;
    let config = &settings.retrieval;
    let trained = train_retrieval(config, &train, &dev)?;
    let n_splits = config.n_splits.min(test.n_images());
    let (splits, mean) = evaluate_retrieval(&trained.model, &test, n_splits, config.seed)?;
    Ok(RetrievalResult {
        dev_r1_sum: trained.dev_r1_sum,
        epochs_run: trained.epochs_run,
        splits,
        mean,
    })
}

//! aer2vec+ training: ADE input vectors predict drug output vectors through
//! `sigmoid(ade . drug)`, fitted by skip-gram-style negative sampling over
//! report-level co-occurrence events.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{EmbeddingSpace, VectorTable};
use crate::error::{Error, Result};
use crate::scalar::{dot, sigmoid, Real};
use crate::vocab::{CooccurrenceEvent, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub initial_learning_rate: f64,
    /// Floor reached by the linear learning-rate decay.
    pub min_learning_rate: f64,
    /// Exponent applied to drug frequencies for the noise distribution.
    pub noise_exponent: f64,
    /// word2vec-style subsampling threshold; `None` disables subsampling.
    pub subsample_threshold: Option<f64>,
    pub seed: u64,
    /// 1 selects the deterministic single-threaded trainer. Larger values
    /// train event shards concurrently and merge their updates.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            epochs: 10,
            negative_samples: 5,
            initial_learning_rate: 0.025,
            min_learning_rate: 0.0001,
            noise_exponent: 0.75,
            subsample_threshold: None,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.negative_samples == 0 {
            return fail("negative_samples must be at least 1");
        }
        if !self.initial_learning_rate.is_finite() || self.initial_learning_rate <= 0.0 {
            return fail("initial learning rate must be positive");
        }
        if self.min_learning_rate.is_nan() || self.min_learning_rate < 0.0 || self.min_learning_rate > self.initial_learning_rate {
            return fail("min learning rate must lie in [0, initial learning rate]");
        }
        if !self.noise_exponent.is_finite() {
            return fail("noise exponent must be finite");
        }
        if matches!(self.subsample_threshold, Some(t) if t.is_nan() || t <= 0.0) {
            return fail("subsample threshold must be positive");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        Ok(())
    }
}

/// ADE rows uniform in `[-0.5/dim, 0.5/dim]`, drug rows zero.
pub fn init_space<T: Real>(ades: &Vocabulary, drugs: &Vocabulary, config: &TrainConfig) -> Result<EmbeddingSpace<T>> {
    config.validate()?;
    if ades.is_empty() || drugs.is_empty() {
        return Err(Error::Config("cannot initialize an embedding over an empty vocabulary".into()));
    }
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 1.0 / dim as f64;
    let ade_data: Vec<T> = (0..ades.len() * dim)
        .map(|_| T::of((rng.gen::<f64>() - 0.5) * scale))
        .collect();
    let ade_table = VectorTable::from_parts(ades.terms().to_vec(), dim, ade_data)?;
    let drug_table = VectorTable::zeros(drugs.terms().to_vec(), dim)?;
    EmbeddingSpace::new(ade_table, drug_table, config.seed)
}

/// `ln(1 + e^x)` without overflow.
fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `label - sigmoid(x)`: the negative derivative of the logistic loss with
/// respect to the score `x`.
pub fn logistic_residual<T: Real>(x: T, label: bool) -> T {
    let target = if label { T::one() } else { T::zero() };
    target - sigmoid(x)
}

/// Negative-sampling loss of one positive pair and its negatives:
/// `-ln sigmoid(a.d) - sum ln sigmoid(-a.n)`.
pub fn sgns_loss<T: Real>(ade: &[T], positive: &[T], negatives: &[&[T]]) -> T {
    let mut loss = softplus(-dot(ade, positive));
    for n in negatives {
        loss = loss + softplus(dot(ade, n));
    }
    loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient<T> {
    pub ade: Vec<T>,
    pub positive: Vec<T>,
    pub negatives: Vec<Vec<T>>,
}

/// Analytic gradient of [`sgns_loss`] with respect to every vector.
pub fn sgns_gradient<T: Real>(ade: &[T], positive: &[T], negatives: &[&[T]]) -> SgnsGradient<T> {
    let scaled = |v: &[T], c: T| v.iter().map(|&x| -c * x).collect::<Vec<T>>();
    let r = logistic_residual(dot(ade, positive), true);
    let mut grad_ade = scaled(positive, r);
    let grad_pos = scaled(ade, r);
    let mut grad_neg = Vec::with_capacity(negatives.len());
    for n in negatives {
        let r = logistic_residual(dot(ade, n), false);
        for (g, &x) in grad_ade.iter_mut().zip(n.iter()) {
            *g = *g - r * x;
        }
        grad_neg.push(scaled(ade, r));
    }
    SgnsGradient {
        ade: grad_ade,
        positive: grad_pos,
        negatives: grad_neg,
    }
}

/// Row access shared by the in-place tables and the per-worker overlays of
/// the parallel trainer.
trait RowStore<T> {
    fn row(&self, i: usize) -> &[T];
    fn row_mut(&mut self, i: usize) -> &mut [T];
}

impl<T: Real> RowStore<T> for VectorTable<T> {
    fn row(&self, i: usize) -> &[T] {
        VectorTable::row(self, i)
    }
    fn row_mut(&mut self, i: usize) -> &mut [T] {
        VectorTable::row_mut(self, i)
    }
}

/// Copy-on-write view of a table; only touched rows are materialized.
struct Overlay<'a, T> {
    base: &'a VectorTable<T>,
    local: HashMap<usize, Vec<T>>,
}

impl<'a, T: Real> Overlay<'a, T> {
    fn new(base: &'a VectorTable<T>) -> Self {
        Overlay {
            base,
            local: HashMap::new(),
        }
    }

    fn into_deltas(self) -> Vec<(usize, Vec<T>)> {
        let mut deltas: Vec<(usize, Vec<T>)> = self
            .local
            .into_iter()
            .map(|(i, row)| {
                let delta = row.iter().zip(self.base.row(i)).map(|(&n, &o)| n - o).collect();
                (i, delta)
            })
            .collect();
        deltas.sort_by_key(|(i, _)| *i);
        deltas
    }
}

impl<T: Real> RowStore<T> for Overlay<'_, T> {
    fn row(&self, i: usize) -> &[T] {
        match self.local.get(&i) {
            Some(v) => v,
            None => self.base.row(i),
        }
    }
    fn row_mut(&mut self, i: usize) -> &mut [T] {
        let base = self.base;
        self.local.entry(i).or_insert_with(|| base.row(i).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrainingEvent {
    pub ade: usize,
    pub drug: usize,
}

impl From<CooccurrenceEvent<'_>> for TrainingEvent {
    fn from(e: CooccurrenceEvent<'_>) -> Self {
        TrainingEvent {
            ade: e.ade_id,
            drug: e.drug_id,
        }
    }
}

/// Events plus the vocabulary frequencies that drive negative sampling and
/// optional subsampling.
#[derive(Debug, Clone)]
pub struct TrainingCorpus {
    pub events: Vec<TrainingEvent>,
    pub ade_frequency: Vec<u64>,
    pub drug_frequency: Vec<u64>,
}

impl TrainingCorpus {
    pub fn new<'a>(
        events: impl IntoIterator<Item = CooccurrenceEvent<'a>>,
        ades: &Vocabulary,
        drugs: &Vocabulary,
    ) -> Self {
        TrainingCorpus {
            events: events.into_iter().map(TrainingEvent::from).collect(),
            ade_frequency: ades.frequencies().to_vec(),
            drug_frequency: drugs.frequencies().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-event negative-sampling loss of each epoch, measured before
    /// each update.
    pub epoch_loss: Vec<f64>,
    pub updates: u64,
}

struct StepContext<'a, T> {
    noise: &'a WeightedIndex<f64>,
    negatives: usize,
    scratch: Vec<T>,
    ade_terms: &'a [String],
    drug_terms: &'a [String],
}

impl<T: Real> StepContext<'_, T> {
    /// One positive update and `negatives` sampled negative updates,
    /// word2vec style: output rows move immediately, the input row receives
    /// the accumulated gradient at the end.
    fn step<A, D, R>(&mut self, ades: &mut A, drugs: &mut D, ev: TrainingEvent, lr: T, rng: &mut R) -> Result<T>
    where
        A: RowStore<T>,
        D: RowStore<T>,
        R: Rng,
    {
        self.scratch.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = T::zero();
        let input = ades.row(ev.ade);
        for k in 0..=self.negatives {
            let (target, label) = if k == 0 {
                (ev.drug, true)
            } else {
                let t = self.noise.sample(rng);
                if t == ev.drug {
                    continue;
                }
                (t, false)
            };
            let output = drugs.row_mut(target);
            let f = dot(input, output);
            let residual = logistic_residual(f, label);
            if !f.is_finite() || !residual.is_finite() {
                return Err(Error::NonFinite {
                    ade: ev.ade,
                    drug: target,
                    ade_term: self.ade_terms[ev.ade].clone(),
                    drug_term: self.drug_terms[target].clone(),
                });
            }
            loss = loss + if label { softplus(-f) } else { softplus(f) };
            let g = residual * lr;
            for ((acc, o), &i) in self.scratch.iter_mut().zip(output.iter_mut()).zip(input) {
                *acc = *acc + g * *o;
                *o = *o + g * i;
            }
        }
        let input = ades.row_mut(ev.ade);
        for (v, &g) in input.iter_mut().zip(&self.scratch) {
            *v = *v + g;
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                ade: ev.ade,
                drug: ev.drug,
                ade_term: self.ade_terms[ev.ade].clone(),
                drug_term: self.drug_terms[ev.drug].clone(),
            });
        }
        Ok(loss)
    }
}

fn keep_probability(freq: u64, total: f64, threshold: f64) -> f64 {
    let scaled = threshold * total;
    let f = freq as f64;
    (((f / scaled).sqrt() + 1.0) * scaled / f).min(1.0)
}

fn derive_seed(parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    let mut z = 0x9E37_79B9_7F4A_7C15_u64;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

const PARALLEL_CHUNK: usize = 2048;

/// Trains `space` in place over `corpus` and returns per-epoch losses.
pub fn train<T: Real>(space: &mut EmbeddingSpace<T>, corpus: &TrainingCorpus, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if space.dim() != config.dim {
        return Err(Error::Config(format!(
            "space has dim {}, config expects {}",
            space.dim(),
            config.dim
        )));
    }
    if corpus.drug_frequency.len() != space.drugs.len() || corpus.ade_frequency.len() != space.ades.len() {
        return Err(Error::Config("corpus frequencies do not match the embedding vocabularies".into()));
    }
    for ev in &corpus.events {
        if ev.ade >= space.ades.len() || ev.drug >= space.drugs.len() {
            return Err(Error::Config(format!(
                "event ({}, {}) references an id outside the vocabularies",
                ev.ade, ev.drug
            )));
        }
    }
    let mut report = TrainReport::default();
    if corpus.events.is_empty() {
        return Ok(report);
    }
    let weights: Vec<f64> = corpus
        .drug_frequency
        .iter()
        .map(|&f| (f as f64).powf(config.noise_exponent))
        .collect();
    let noise = WeightedIndex::new(&weights)
        .map_err(|e| Error::Config(format!("invalid noise distribution: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let n = corpus.events.len();
    let total_steps = (config.epochs * n) as f64;
    let lr0 = config.initial_learning_rate;
    let lr_min = config.min_learning_rate;
    let lr_at = |step: usize| T::of((lr0 - (lr0 - lr_min) * step as f64 / total_steps).max(lr_min));

    let keep: Option<(Vec<f64>, Vec<f64>)> = config.subsample_threshold.map(|t| {
        let total_a: f64 = corpus.ade_frequency.iter().map(|&f| f as f64).sum();
        let total_d: f64 = corpus.drug_frequency.iter().map(|&f| f as f64).sum();
        (
            corpus.ade_frequency.iter().map(|&f| keep_probability(f, total_a, t)).collect(),
            corpus.drug_frequency.iter().map(|&f| keep_probability(f, total_d, t)).collect(),
        )
    });

    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut selected: Vec<TrainingEvent> = Vec::with_capacity(n);
        for &i in &order {
            let ev = corpus.events[i as usize];
            if let Some((ka, kd)) = &keep {
                if rng.gen::<f64>() > ka[ev.ade] * kd[ev.drug] {
                    continue;
                }
            }
            selected.push(ev);
        }
        let loss = if config.threads == 1 {
            let (ade_terms, drug_terms) = (space.ades.terms().to_vec(), space.drugs.terms().to_vec());
            let mut ctx = StepContext {
                noise: &noise,
                negatives: config.negative_samples,
                scratch: vec![T::zero(); config.dim],
                ade_terms: &ade_terms,
                drug_terms: &drug_terms,
            };
            let mut loss = 0.0;
            for (k, &ev) in selected.iter().enumerate() {
                let lr = lr_at(step + k * n / selected.len().max(1));
                loss += ctx.step(&mut space.ades, &mut space.drugs, ev, lr, &mut rng)?.as_f64();
            }
            loss
        } else {
            train_epoch_parallel(space, &selected, &noise, config, epoch, step, n, &lr_at)?
        };
        step += n;
        report.updates += selected.len() as u64;
        report.epoch_loss.push(loss / selected.len().max(1) as f64);
        log::debug!("epoch {} loss {:.6}", epoch + 1, report.epoch_loss[epoch]);
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn train_epoch_parallel<T: Real>(
    space: &mut EmbeddingSpace<T>,
    events: &[TrainingEvent],
    noise: &WeightedIndex<f64>,
    config: &TrainConfig,
    epoch: usize,
    epoch_start: usize,
    epoch_len: usize,
    lr_at: &(dyn Fn(usize) -> T + Sync),
) -> Result<f64> {
    let workers = config.threads;
    let ade_terms = space.ades.terms().to_vec();
    let drug_terms = space.drugs.terms().to_vec();
    let mut loss = 0.0;
    let scale = epoch_len as f64 / events.len().max(1) as f64;
    for (round, block) in events.chunks(PARALLEL_CHUNK * workers).enumerate() {
        let block_start = round * PARALLEL_CHUNK * workers;
        let shard_len = block.len().div_ceil(workers);
        let ades = &space.ades;
        let drugs = &space.drugs;
        type Deltas<T> = (Vec<(usize, Vec<T>)>, Vec<(usize, Vec<T>)>, f64);
        let results: Vec<Result<Deltas<T>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = block
                .chunks(shard_len)
                .enumerate()
                .map(|(w, shard)| {
                    let (ade_terms, drug_terms) = (&ade_terms, &drug_terms);
                    scope.spawn(move || -> Result<Deltas<T>> {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                            config.seed,
                            epoch as u64,
                            round as u64,
                            w as u64,
                        ]));
                        let mut a = Overlay::new(ades);
                        let mut d = Overlay::new(drugs);
                        let mut ctx = StepContext {
                            noise,
                            negatives: config.negative_samples,
                            scratch: vec![T::zero(); config.dim],
                            ade_terms,
                            drug_terms,
                        };
                        let mut loss = 0.0;
                        for (k, &ev) in shard.iter().enumerate() {
                            let pos = block_start + w * shard_len + k;
                            let lr = lr_at(epoch_start + (pos as f64 * scale) as usize);
                            loss += ctx.step(&mut a, &mut d, ev, lr, &mut rng)?.as_f64();
                        }
                        Ok((a.into_deltas(), d.into_deltas(), loss))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        for result in results {
            let (ade_deltas, drug_deltas, l) = result?;
            loss += l;
            for (i, delta) in ade_deltas {
                for (v, dv) in space.ades.row_mut(i).iter_mut().zip(delta) {
                    *v = *v + dv;
                }
            }
            for (i, delta) in drug_deltas {
                for (v, dv) in space.drugs.row_mut(i).iter_mut().zip(delta) {
                    *v = *v + dv;
                }
            }
        }
    }
    Ok(loss)
}

//! The partitioned ensemble: one scalar-output network per contiguous range
//! of pattern ids, with residual-based routing at prediction time.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::thread;

use crate::corpus::{check_ranges, partition_by_range, Corpus};
use crate::domain::{AttackScenario, Vocabulary, N_ATTRIBUTES};
use crate::encoder::{decode_prediction, encode_scenario, normalize_features, TargetScaling, DEFAULT_BAND};
use crate::error::{Error, Result};
use crate::mlp::{train, Activation, Network, NetworkSpec, Sample, TrainConfig, TrainReport};

/// Default number of consecutive pattern ids one network may own.
pub const DEFAULT_MAX_CLASSES: usize = 28;

/// Covers the sorted ids left to right. Each range starts at the smallest
/// uncovered id and ends at the largest present id no more than
/// `max_classes - 1` above it, so a range spans at most `max_classes`
/// consecutive id values.
pub fn build_partitions(ids: &BTreeSet<u32>, max_classes: usize) -> Vec<(u32, u32)> {
    let span = max_classes.max(1) as u64;
    let mut ranges = Vec::new();
    let mut iter = ids.iter().copied().peekable();
    while let Some(lo) = iter.next() {
        let limit = lo as u64 + span - 1;
        let mut hi = lo;
        while let Some(&next) = iter.peek() {
            if next as u64 > limit {
                break;
            }
            hi = next;
            iter.next();
        }
        ranges.push((lo, hi));
    }
    ranges
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub scaling: TargetScaling,
    pub network: Network,
    /// Present after training; not stored in model files.
    pub report: Option<TrainReport>,
}

impl Partition {
    pub fn lo(&self) -> u32 {
        self.scaling.lo()
    }

    pub fn hi(&self) -> u32 {
        self.scaling.hi()
    }

    pub fn contains(&self, id: u32) -> bool {
        (self.lo()..=self.hi()).contains(&id)
    }
}

/// Everything [`train_ensemble`] needs besides the data.
///
/// Defaults differ from a bare [`TrainConfig`]: a linear output unit, a
/// larger step with lighter momentum, and patience 50, since full-batch
/// momentum makes the validation error oscillate over about a dozen epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub train: TrainConfig,
    pub network: NetworkSpec,
    pub max_classes_per_net: usize,
    pub band: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            train: TrainConfig {
                learning_rate: 0.1,
                momentum: 0.8,
                patience: 50,
                ..TrainConfig::default()
            },
            network: NetworkSpec {
                output_activation: Activation::Linear,
                ..NetworkSpec::default()
            },
            max_classes_per_net: DEFAULT_MAX_CLASSES,
            band: DEFAULT_BAND,
        }
    }
}

/// Result of routing one scenario through the ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub pattern_id: u32,
    /// Winning network's output on the pattern-id scale.
    pub raw: f64,
    pub partition: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    partitions: Vec<Partition>,
    vocab_fingerprint: String,
}

impl EnsembleModel {
    pub fn new(partitions: Vec<Partition>, vocab_fingerprint: impl Into<String>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::Config("an ensemble needs at least one partition".into()));
        }
        let ranges: Vec<(u32, u32)> = partitions.iter().map(|p| (p.lo(), p.hi())).collect();
        check_ranges(&ranges)?;
        if ranges.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::Config("partitions must be sorted by range".into()));
        }
        for p in &partitions {
            let spec = p.network.spec();
            if spec.n_in != N_ATTRIBUTES || spec.n_out != 1 {
                return Err(Error::Config(format!(
                    "partition ({}, {}) network must be {N_ATTRIBUTES}-in 1-out",
                    p.lo(),
                    p.hi()
                )));
            }
        }
        Ok(EnsembleModel {
            partitions,
            vocab_fingerprint: vocab_fingerprint.into(),
        })
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn vocab_fingerprint(&self) -> &str {
        &self.vocab_fingerprint
    }

    fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let actual = vocab.fingerprint();
        if actual != self.vocab_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.vocab_fingerprint.clone(),
                actual,
            });
        }
        Ok(())
    }

    /// Index of the partition whose range contains `id`.
    pub fn home_partition(&self, id: u32) -> Option<usize> {
        self.partitions.iter().position(|p| p.contains(id))
    }

    pub fn predict_pattern(&self, scenario: &AttackScenario, vocab: &Vocabulary) -> Result<Prediction> {
        self.check_vocab(vocab)?;
        let codes = encode_scenario(scenario, vocab)?;
        self.route(&codes, vocab)
    }

    pub fn predict_codes(&self, codes: &[u32; N_ATTRIBUTES], vocab: &Vocabulary) -> Result<Prediction> {
        self.check_vocab(vocab)?;
        self.route(codes, vocab)
    }

    fn route(&self, codes: &[u32; N_ATTRIBUTES], vocab: &Vocabulary) -> Result<Prediction> {
        let x = normalize_features(codes, vocab)?;
        let mut raws = Vec::with_capacity(self.partitions.len());
        for p in &self.partitions {
            let y = p.network.predict(x.as_slice())?[0];
            raws.push(p.scaling.unscale(y));
        }
        let bounds: Vec<(u32, u32)> = self.partitions.iter().map(|p| (p.lo(), p.hi())).collect();
        Ok(route_by_residual(&raws, &bounds))
    }

    pub fn evaluate(&self, test: &Corpus, vocab: &Vocabulary) -> Result<EvalReport> {
        self.check_vocab(vocab)?;
        if test.is_empty() {
            return Err(Error::Config("cannot evaluate on an empty corpus".into()));
        }
        let mut rows = Vec::with_capacity(test.len());
        for record in test.records() {
            let prediction = self.route(&record.codes, vocab)?;
            rows.push(EvalRow {
                scenario_id: record.scenario_id.clone(),
                expected: record.pattern_id,
                raw: prediction.raw,
                predicted: prediction.pattern_id,
                correct: prediction.pattern_id == record.pattern_id,
                partition: prediction.partition,
            });
        }
        rows.sort_by(|a, b| {
            a.expected
                .cmp(&b.expected)
                .then_with(|| a.scenario_id.cmp(&b.scenario_id))
        });

        let partitions = self
            .partitions
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let home: Vec<&EvalRow> = rows
                    .iter()
                    .filter(|r| self.home_partition(r.expected) == Some(k))
                    .collect();
                PartitionAccuracy {
                    lo: p.lo(),
                    hi: p.hi(),
                    correct: home.iter().filter(|r| r.correct).count(),
                    total: home.len(),
                }
            })
            .collect();
        let correct = rows.iter().filter(|r| r.correct).count();
        Ok(EvalReport {
            accuracy: correct as f64 / rows.len() as f64,
            correct,
            rows,
            partitions,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("ensemblev1,{},{}\n", self.partitions.len(), self.vocab_fingerprint);
        for p in &self.partitions {
            let _ = writeln!(out, "{},{},{}", p.lo(), p.hi(), p.scaling.band());
            out.push_str(&p.network.to_text());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let manifest = lines.next().ok_or_else(|| Error::parse(1, "empty ensemble file"))?;
        let fields: Vec<&str> = manifest.split(',').collect();
        if fields.len() != 3 || fields[0] != "ensemblev1" {
            return Err(Error::parse(1, format!("bad ensemble manifest {manifest:?}")));
        }
        let count: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(1, format!("bad partition count {:?}", fields[1])))?;
        let fingerprint = fields[2].to_string();

        let mut line_no = 2;
        let mut partitions = Vec::with_capacity(count);
        for _ in 0..count {
            let header = lines
                .next()
                .ok_or_else(|| Error::parse(line_no, "missing partition header"))?;
            let parts: Vec<&str> = header.split(',').collect();
            let bad = || Error::parse(line_no, format!("bad partition header {header:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let lo: u32 = parts[0].parse().map_err(|_| bad())?;
            let hi: u32 = parts[1].parse().map_err(|_| bad())?;
            let band: f64 = parts[2].parse().map_err(|_| bad())?;
            let scaling = TargetScaling::new(lo, hi, band).map_err(|e| Error::parse(line_no, e.to_string()))?;
            let network = Network::parse_lines(&mut lines, line_no + 1)?;
            line_no += 1 + network.line_count();
            partitions.push(Partition {
                scaling,
                network,
                report: None,
            });
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::parse(line_no, "trailing content after last partition"));
        }
        EnsembleModel::new(partitions, fingerprint)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Picks the partition whose raw output lies closest to an id it can
/// decode to; ties go to the lowest index.
pub fn route_by_residual(raws: &[f64], bounds: &[(u32, u32)]) -> Prediction {
    let mut best: Option<(f64, Prediction)> = None;
    for (k, (&raw, &(lo, hi))) in raws.iter().zip(bounds).enumerate() {
        let pattern_id = decode_prediction(raw, lo, hi);
        let residual = (raw - pattern_id as f64).abs();
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((
                residual,
                Prediction {
                    pattern_id,
                    raw,
                    partition: k,
                },
            ));
        }
    }
    best.expect("at least one partition").1
}

/// Trains one network per id range found in `train_set`.
///
/// Partition `k` initializes and trains with seed `config.train.seed + k`.
/// Partitions train on separate threads and are merged in range order.
pub fn train_ensemble(train_set: &Corpus, vocab: &Vocabulary, config: &EnsembleConfig) -> Result<EnsembleModel> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    config.train.validate()?;
    train_set.check_codes(vocab)?;
    if config.network.n_in != N_ATTRIBUTES || config.network.n_out != 1 {
        return Err(Error::Config(format!(
            "ensemble networks must be {N_ATTRIBUTES}-in 1-out, got {}-{}-{}",
            config.network.n_in, config.network.n_hidden, config.network.n_out
        )));
    }
    let ids: BTreeSet<u32> = train_set.pattern_ids().into_iter().collect();
    let ranges = build_partitions(&ids, config.max_classes_per_net);
    let subsets = partition_by_range(train_set, &ranges)?;

    let mut jobs = Vec::with_capacity(ranges.len());
    for (k, (&(lo, hi), subset)) in ranges.iter().zip(&subsets).enumerate() {
        let scaling = TargetScaling::new(lo, hi, config.band)?;
        let samples = subset
            .records()
            .iter()
            .map(|r| {
                let x = normalize_features(&r.codes, vocab)?;
                Ok(Sample::new(x.0.to_vec(), vec![scaling.scale(r.pattern_id)?]))
            })
            .collect::<Result<Vec<_>>>()?;
        let seed = config.train.seed.wrapping_add(k as u64);
        let train_config = TrainConfig { seed, ..config.train };
        jobs.push((scaling, samples, train_config));
    }

    let network_spec = config.network;
    let results: Vec<Result<Partition>> = thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(scaling, samples, train_config)| {
                scope.spawn(move || {
                    let init = Network::init(network_spec, train_config.seed);
                    let (network, report) = train(&init, samples, train_config)?;
                    Ok(Partition {
                        scaling: *scaling,
                        network,
                        report: Some(report),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    let partitions = results.into_iter().collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(partitions, vocab.fingerprint())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub scenario_id: String,
    pub expected: u32,
    pub raw: f64,
    pub predicted: u32,
    pub correct: bool,
    /// Partition the scenario was routed to.
    pub partition: usize,
}

/// Accuracy over the rows whose expected id falls in a partition's range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionAccuracy {
    pub lo: u32,
    pub hi: u32,
    pub correct: usize,
    pub total: usize,
}

impl PartitionAccuracy {
    /// `None` when no test row belongs to the partition.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Sorted by expected id, then scenario id.
    pub rows: Vec<EvalRow>,
    pub partitions: Vec<PartitionAccuracy>,
    pub correct: usize,
    pub accuracy: f64,
}

pub const EVAL_HEADER: &str = "scenario_id,partition,expected,actual_raw,predicted,correct";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{EVAL_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{},{}",
                r.scenario_id, r.partition, r.expected, r.raw, r.predicted, r.correct as u8
            );
        }
        out
    }
}

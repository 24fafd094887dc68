//! The comma-delimited training corpus: one encoded scenario per line,
//! `scenario_id,c1,...,c12,pattern_id`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{AttackScenario, AttributeKind, Vocabulary, N_ATTRIBUTES};
use crate::error::{Error, Result};

/// Header line written at the top of every corpus file.
pub const CORPUS_HEADER: &str = "scenario_id,attacker,source,target,vector,type,input_validation,dependencies,output_encoding,authentication,access_control,http_security,error_handling,pattern_id";

/// One encoded, labelled scenario.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Record {
    pub scenario_id: String,
    pub codes: [u32; N_ATTRIBUTES],
    pub pattern_id: u32,
}

impl Record {
    pub fn new(scenario_id: impl Into<String>, codes: [u32; N_ATTRIBUTES], pattern_id: u32) -> Self {
        Record {
            scenario_id: scenario_id.into(),
            codes,
            pattern_id,
        }
    }

    /// Looks every code up in `vocab`.
    pub fn decode(&self, vocab: &Vocabulary) -> Result<AttackScenario> {
        let mut scenario = AttackScenario::new(self.scenario_id.clone());
        for (kind, &code) in AttributeKind::ALL.iter().zip(&self.codes) {
            let value = vocab.value_of(*kind, code).ok_or(Error::CodeOutOfRange {
                kind: *kind,
                code,
                size: vocab.size(*kind),
            })?;
            scenario.set(*kind, value.clone());
        }
        scenario.pattern_id = Some(self.pattern_id);
        Ok(scenario)
    }
}

/// An ordered collection of labelled records with unique scenario ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<Record>,
    pub source_path: String,
}

impl Corpus {
    pub fn new(records: Vec<Record>, source_path: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for record in &records {
            check_scenario_id(&record.scenario_id).map_err(|m| Error::Config(m.to_string()))?;
            if record.pattern_id == 0 {
                return Err(Error::Config(format!("{}: pattern ids start at 1", record.scenario_id)));
            }
            if !seen.insert(record.scenario_id.as_str()) {
                return Err(Error::DuplicateScenario(record.scenario_id.clone()));
            }
        }
        Ok(Corpus {
            records,
            source_path: source_path.into(),
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct pattern ids, ascending.
    pub fn pattern_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.pattern_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Every code is within its kind's vocabulary.
    pub fn check_codes(&self, vocab: &Vocabulary) -> Result<()> {
        for record in &self.records {
            for (kind, &code) in AttributeKind::ALL.iter().zip(&record.codes) {
                let size = vocab.size(*kind);
                if code as usize >= size {
                    return Err(Error::CodeOutOfRange {
                        kind: *kind,
                        code,
                        size,
                    });
                }
            }
        }
        Ok(())
    }

    fn subset(&self, indices: impl IntoIterator<Item = usize>) -> Corpus {
        Corpus {
            records: indices.into_iter().map(|i| self.records[i].clone()).collect(),
            source_path: self.source_path.clone(),
        }
    }

    pub fn parse(text: &str, source_path: impl Into<String>) -> Result<Self> {
        parse_corpus(text.as_bytes(), source_path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        parse_corpus(bytes.as_slice(), path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CORPUS_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.scenario_id);
            for code in r.codes {
                out.push(',');
                out.push_str(&code.to_string());
            }
            out.push(',');
            out.push_str(&r.pattern_id.to_string());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<usize> {
        let mut file = fs::File::create(path)?;
        write_corpus(self, &mut file)
    }
}

fn check_scenario_id(id: &str) -> std::result::Result<(), &'static str> {
    if id.is_empty() {
        Err("empty scenario id")
    } else if id.contains(',') || id.contains(char::is_whitespace) {
        Err("scenario id contains a comma or whitespace")
    } else if !id.is_ascii() {
        Err("scenario id is not ASCII")
    } else {
        Ok(())
    }
}

/// Reads a corpus. An optional first line starting with `scenario_id` is
/// treated as a header; blank lines are ignored.
pub fn parse_corpus(mut input: impl Read, source_path: impl Into<String>) -> Result<Corpus> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if let Some(pos) = bytes.iter().position(|b| !b.is_ascii()) {
        let line = bytes[..pos].iter().filter(|&&b| b == b'\n').count() + 1;
        return Err(Error::parse(line, "input is not 7-bit ASCII"));
    }
    let text = String::from_utf8(bytes).expect("ASCII is valid UTF-8");

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (n == 0 && line.starts_with("scenario_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N_ATTRIBUTES + 2 {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, found {}", N_ATTRIBUTES + 2, fields.len()),
            ));
        }
        let scenario_id = fields[0].trim();
        check_scenario_id(scenario_id).map_err(|m| Error::parse(line_no, m))?;
        let mut codes = [0u32; N_ATTRIBUTES];
        for (slot, field) in codes.iter_mut().zip(&fields[1..=N_ATTRIBUTES]) {
            *slot = parse_unsigned(field, line_no)?;
        }
        let pattern_id = parse_unsigned(fields[N_ATTRIBUTES + 1], line_no)?;
        if pattern_id == 0 {
            return Err(Error::parse(line_no, "pattern ids start at 1"));
        }
        if !seen.insert(scenario_id.to_string()) {
            return Err(Error::DuplicateScenario(scenario_id.to_string()));
        }
        records.push(Record::new(scenario_id, codes, pattern_id));
    }
    Ok(Corpus {
        records,
        source_path: source_path.into(),
    })
}

fn parse_unsigned(field: &str, line_no: usize) -> Result<u32> {
    let field = field.trim();
    if field.starts_with('-') {
        return Err(Error::parse(line_no, format!("negative value {field:?}")));
    }
    field
        .parse()
        .map_err(|_| Error::parse(line_no, format!("not a non-negative integer: {field:?}")))
}

/// Writes the header and one line per record (LF, trailing newline).
/// Returns the number of bytes written.
pub fn write_corpus(corpus: &Corpus, mut out: impl Write) -> Result<usize> {
    let text = corpus.to_text();
    out.write_all(text.as_bytes())?;
    Ok(text.len())
}

/// Default training share: 260 training samples out of 311.
pub const DEFAULT_TRAIN_FRACTION: f64 = 260.0 / 311.0;

/// How to divide a corpus into training and test sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            seed,
            stratified: true,
        }
    }
}

/// Splits into `(train, test)`, each keeping the input order.
///
/// The training size is `round(n * train_fraction)` clamped to `1..=n-1`.
/// Stratified splits keep at least one sample of every pattern in training
/// and spread test samples round-robin across patterns (visited in a seeded
/// order), so test can come up short of its target when patterns are thin.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::CorpusTooSmall(n));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n_train = ((n as f64 * spec.train_fraction).round() as usize).clamp(1, n - 1);
    let n_test = n - n_train;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut is_test = vec![false; n];
    if spec.stratified {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, r) in corpus.records.iter().enumerate() {
            groups.entry(r.pattern_id).or_default().push(i);
        }
        let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
        for group in &mut groups {
            group.shuffle(&mut rng);
        }
        let mut order: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].len() >= 2).collect();
        order.shuffle(&mut rng);

        let mut taken = vec![0usize; groups.len()];
        let mut remaining = n_test;
        while remaining > 0 {
            let mut progressed = false;
            for &g in &order {
                if remaining == 0 {
                    break;
                }
                if taken[g] + 1 < groups[g].len() {
                    is_test[groups[g][taken[g]]] = true;
                    taken[g] += 1;
                    remaining -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
    } else {
        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        for &i in &indices[..n_test] {
            is_test[i] = true;
        }
    }

    let train = corpus.subset((0..n).filter(|&i| !is_test[i]));
    let test = corpus.subset((0..n).filter(|&i| is_test[i]));
    Ok((train, test))
}

/// Checks that inclusive ranges are well formed and pairwise disjoint.
pub fn check_ranges(ranges: &[(u32, u32)]) -> Result<()> {
    for &(lo, hi) in ranges {
        if lo > hi {
            return Err(Error::Config(format!("range ({lo}, {hi}) is empty")));
        }
    }
    for (i, &(lo_a, hi_a)) in ranges.iter().enumerate() {
        for &(lo_b, hi_b) in &ranges[i + 1..] {
            if lo_a <= hi_b && lo_b <= hi_a {
                return Err(Error::OverlappingRanges(lo_a.max(lo_b)));
            }
        }
    }
    Ok(())
}

/// Routes each record to the unique inclusive range containing its pattern.
pub fn partition_by_range(corpus: &Corpus, ranges: &[(u32, u32)]) -> Result<Vec<Corpus>> {
    check_ranges(ranges)?;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); ranges.len()];
    for (i, r) in corpus.records.iter().enumerate() {
        let k = ranges
            .iter()
            .position(|&(lo, hi)| (lo..=hi).contains(&r.pattern_id))
            .ok_or(Error::UncoveredPattern(r.pattern_id))?;
        buckets[k].push(i);
    }
    Ok(buckets.into_iter().map(|b| corpus.subset(b)).collect())
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        prop::collection::vec((prop::array::uniform12(0u32..50), 1u32..60), 0..40).prop_map(|rows| {
            let records = rows
                .into_iter()
                .enumerate()
                .map(|(i, (codes, pattern))| Record::new(format!("R{i}"), codes, pattern))
                .collect();
            Corpus::new(records, "gen").unwrap()
        })
    }

    proptest! {
        #[test]
        fn write_parse_round_trip(corpus in arb_corpus()) {
            let text = corpus.to_text();
            let back = Corpus::parse(&text, "gen").unwrap();
            prop_assert_eq!(&back, &corpus);
            prop_assert_eq!(back.to_text(), text);
        }

        #[test]
        fn split_is_disjoint_and_exhaustive(
            corpus in arb_corpus(),
            fraction in 0.01f64..0.99,
            seed in any::<u64>(),
            stratified in any::<bool>(),
        ) {
            prop_assume!(corpus.len() >= 2);
            let spec = SplitSpec { train_fraction: fraction, seed, stratified };
            let (train, test) = split_corpus(&corpus, &spec).unwrap();
            prop_assert_eq!(train.len() + test.len(), corpus.len());
            prop_assert!(!train.is_empty());
            let train_ids: HashSet<_> = train.records().iter().map(|r| &r.scenario_id).collect();
            prop_assert!(test.records().iter().all(|r| !train_ids.contains(&r.scenario_id)));
            if stratified {
                prop_assert_eq!(train.pattern_ids(), corpus.pattern_ids());
            } else {
                prop_assert!(!test.is_empty());
            }
        }

        #[test]
        fn partition_preserves_samples(corpus in arb_corpus()) {
            let parts = partition_by_range(&corpus, &[(1, 20), (21, 40), (41, 59)]).unwrap();
            let mut merged: Vec<Record> = parts.iter().flat_map(|p| p.records().to_vec()).collect();
            let mut original = corpus.records().to_vec();
            merged.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
            original.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
            prop_assert_eq!(merged, original);
        }
    }
}

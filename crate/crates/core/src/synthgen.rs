//! Seeded synthetic corpora: each pattern has a canonical attribute profile,
//! and repeated scenarios perturb a subset of its attributes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Record};
use crate::domain::{AttributeKind, Vocabulary, N_ATTRIBUTES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternTemplate {
    pub pattern_id: u32,
    pub canonical_codes: [u32; N_ATTRIBUTES],
    /// `jitter[i]` allows attribute `i` to vary.
    pub jitter: [bool; N_ATTRIBUTES],
}

impl PatternTemplate {
    pub fn jitter_kinds(&self) -> impl Iterator<Item = AttributeKind> + '_ {
        AttributeKind::ALL.into_iter().filter(|k| self.jitter[k.index()])
    }

    pub fn check(&self, vocab: &Vocabulary) -> Result<()> {
        for (kind, &code) in AttributeKind::ALL.iter().zip(&self.canonical_codes) {
            let size = vocab.size(*kind);
            if code as usize >= size {
                return Err(Error::CodeOutOfRange {
                    kind: *kind,
                    code,
                    size,
                });
            }
        }
        Ok(())
    }
}

/// Emits `per_pattern` scenarios per template, ids `SYN-<pattern>-<k>` with
/// `k` from 1. Each jitter attribute is independently replaced, with
/// probability `noise_rate`, by a uniformly drawn different code; kinds with
/// a single value stay put.
pub fn generate_corpus(
    templates: &[PatternTemplate],
    per_pattern: usize,
    noise_rate: f64,
    seed: u64,
    vocab: &Vocabulary,
) -> Result<Corpus> {
    if templates.is_empty() {
        return Err(Error::Config("no pattern templates".into()));
    }
    if per_pattern == 0 {
        return Err(Error::Config("per_pattern must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&noise_rate) {
        return Err(Error::Config(format!(
            "noise rate must lie in [0, 1], got {noise_rate}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(templates.len() * per_pattern);
    for template in templates {
        template.check(vocab)?;
        for k in 1..=per_pattern {
            let mut codes = template.canonical_codes;
            for kind in template.jitter_kinds() {
                let size = vocab.size(kind) as u32;
                if size < 2 || rng.gen::<f64>() >= noise_rate {
                    continue;
                }
                let canonical = codes[kind.index()];
                let draw = rng.gen_range(0..size - 1);
                codes[kind.index()] = if draw >= canonical { draw + 1 } else { draw };
            }
            records.push(Record::new(
                format!("SYN-{}-{k}", template.pattern_id),
                codes,
                template.pattern_id,
            ));
        }
    }
    Corpus::new(records, format!("synthetic:seed={seed}"))
}

pub const TEMPLATE_HEADER: &str = "pattern_id,c1,c2,c3,c4,c5,c6,c7,c8,c9,c10,c11,c12,jitter_mask";

pub fn templates_to_text(templates: &[PatternTemplate]) -> String {
    let mut out = format!("{TEMPLATE_HEADER}\n");
    for t in templates {
        let _ = write!(out, "{}", t.pattern_id);
        for code in t.canonical_codes {
            let _ = write!(out, ",{code}");
        }
        let mask: String = t.jitter.iter().map(|&j| if j { '1' } else { '0' }).collect();
        let _ = writeln!(out, ",{mask}");
    }
    out
}

pub fn templates_from_text(text: &str) -> Result<Vec<PatternTemplate>> {
    let mut templates = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || (n == 0 && line.starts_with("pattern_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != N_ATTRIBUTES + 2 {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, found {}", N_ATTRIBUTES + 2, fields.len()),
            ));
        }
        let number = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| Error::parse(line_no, format!("not a non-negative integer: {s:?}")))
        };
        let pattern_id = number(fields[0])?;
        if pattern_id == 0 {
            return Err(Error::parse(line_no, "pattern ids start at 1"));
        }
        let mut canonical_codes = [0u32; N_ATTRIBUTES];
        for (slot, field) in canonical_codes.iter_mut().zip(&fields[1..=N_ATTRIBUTES]) {
            *slot = number(field)?;
        }
        let mask = fields[N_ATTRIBUTES + 1];
        if mask.len() != N_ATTRIBUTES || !mask.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::parse(
                line_no,
                format!("jitter mask must be 12 binary digits, got {mask:?}"),
            ));
        }
        let mut jitter = [false; N_ATTRIBUTES];
        for (slot, b) in jitter.iter_mut().zip(mask.bytes()) {
            *slot = b == b'1';
        }
        templates.push(PatternTemplate {
            pattern_id,
            canonical_codes,
            jitter,
        });
    }
    Ok(templates)
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<PatternTemplate>> {
    templates_from_text(&fs::read_to_string(path)?)
}

/// Pattern ids of the default roster: 1..=53 without 18 and 19.
pub fn default_roster() -> Vec<u32> {
    (1..=53).filter(|id| *id != 18 && *id != 19).collect()
}

pub const DEFAULT_PER_PATTERN: usize = 6;
pub const DEFAULT_NOISE: f64 = 0.15;

/// Vocabulary sizes of the generation vocabulary, by schema position.
const GENERATION_SIZES: [usize; N_ATTRIBUTES] = [4, 3, 14, 53, 6, 3, 7, 3, 3, 3, 4, 3];

/// The pinned vocabulary padded with `synthetic <column> <n>` values up to
/// the sizes the default templates need.
pub fn generation_vocabulary() -> Vocabulary {
    let mut vocab = Vocabulary::pinned();
    for (kind, &size) in AttributeKind::ALL.iter().zip(&GENERATION_SIZES) {
        let mut n = 0;
        while vocab.size(*kind) < size {
            vocab.register_text(*kind, &format!("synthetic {} {n}", kind.column()));
            n += 1;
        }
    }
    vocab
}

/// Free kinds marked for jitter in each default template.
pub const JITTER_PER_TEMPLATE: usize = 3;

/// Kinds whose canonical codes are derived from the pattern id.
const PROFILE_KINDS: [AttributeKind; 4] = [
    AttributeKind::Target,
    AttributeKind::AttackVector,
    AttributeKind::AttackType,
    AttributeKind::HttpSecurity,
];

/// Templates for [`default_roster`] over [`generation_vocabulary`].
///
/// With `r = id - 1`, the profile kinds are attack vector `r`, target `r / 4`,
/// HTTP security `r % 4` and attack type `r / 9`; they are never jittered,
/// and the id is an affine function of their normalized features. The other
/// kinds get per-pattern codes from a fixed stream, and `JITTER_PER_TEMPLATE`
/// of them are marked for jitter.
pub fn default_templates() -> Vec<PatternTemplate> {
    let vocab = generation_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ab1e);
    let free: Vec<AttributeKind> = AttributeKind::ALL
        .into_iter()
        .filter(|k| !PROFILE_KINDS.contains(k))
        .collect();
    default_roster()
        .into_iter()
        .map(|id| {
            let r = id - 1;
            let mut codes = [0u32; N_ATTRIBUTES];
            codes[AttributeKind::AttackVector.index()] = r;
            codes[AttributeKind::Target.index()] = r / 4;
            codes[AttributeKind::HttpSecurity.index()] = r % 4;
            codes[AttributeKind::AttackType.index()] = r / 9;
            for &kind in &free {
                codes[kind.index()] = rng.gen_range(0..vocab.size(kind) as u32);
            }
            let mut jitter = [false; N_ATTRIBUTES];
            let mut marked = 0;
            while marked < JITTER_PER_TEMPLATE {
                let kind = free[rng.gen_range(0..free.len())];
                if !jitter[kind.index()] {
                    jitter[kind.index()] = true;
                    marked += 1;
                }
            }
            PatternTemplate {
                pattern_id: id,
                canonical_codes: codes,
                jitter,
            }
        })
        .collect()
}

/// The default synthetic corpus with its generation vocabulary.
pub fn default_corpus(seed: u64) -> (Corpus, Vocabulary) {
    let vocab = generation_vocabulary();
    let corpus = generate_corpus(&default_templates(), DEFAULT_PER_PATTERN, DEFAULT_NOISE, seed, &vocab)
        .expect("default templates are valid");
    (corpus, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_vocab() -> Vocabulary {
        let mut vocab = Vocabulary::new();
        for kind in AttributeKind::ALL {
            vocab.register_text(kind, "a");
        }
        vocab.register_text(AttributeKind::Source, "b");
        for v in ["b", "c", "d"] {
            vocab.register_text(AttributeKind::Target, v);
        }
        vocab
    }

    fn template(id: u32, jitter: &[AttributeKind]) -> PatternTemplate {
        let mut mask = [false; N_ATTRIBUTES];
        jitter.iter().for_each(|k| mask[k.index()] = true);
        PatternTemplate {
            pattern_id: id,
            canonical_codes: [0; N_ATTRIBUTES],
            jitter: mask,
        }
    }

    #[test]
    fn zero_noise_reproduces_templates() {
        let templates = default_templates();
        let vocab = generation_vocabulary();
        let corpus = generate_corpus(&templates, 4, 0.0, 1, &vocab).unwrap();
        for (record, t) in corpus.records().iter().zip(templates.iter().flat_map(|t| [t; 4])) {
            assert_eq!(record.codes, t.canonical_codes);
            assert_eq!(record.pattern_id, t.pattern_id);
        }
        assert_eq!(corpus.records()[0].scenario_id, "SYN-1-1");
    }

    #[test]
    fn sample_count() {
        let templates = default_templates();
        assert_eq!(templates.len(), 51);
        let corpus = generate_corpus(&templates, 5, 0.15, 2, &generation_vocabulary()).unwrap();
        assert_eq!(corpus.len(), 255);
    }

    #[test]
    fn full_noise_flips_binary_kind() {
        let vocab = tiny_vocab();
        let t = template(1, &[AttributeKind::Source, AttributeKind::Attacker]);
        let corpus = generate_corpus(&[t], 50, 1.0, 3, &vocab).unwrap();
        for r in corpus.records() {
            assert_eq!(r.codes[AttributeKind::Source.index()], 1);
            // single-valued kind cannot change
            assert_eq!(r.codes[AttributeKind::Attacker.index()], 0);
        }
    }

    #[test]
    fn noise_never_keeps_the_canonical_code() {
        let vocab = tiny_vocab();
        let t = template(2, &[AttributeKind::Target]);
        let corpus = generate_corpus(&[t], 200, 1.0, 4, &vocab).unwrap();
        let mut seen = [0usize; 4];
        for r in corpus.records() {
            seen[r.codes[AttributeKind::Target.index()] as usize] += 1;
        }
        assert_eq!(seen[0], 0);
        assert!(seen[1..].iter().all(|&c| c > 40));
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let (a, vocab) = default_corpus(42);
        let (b, _) = default_corpus(42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 306);
        a.check_codes(&vocab).unwrap();
        let (c, _) = default_corpus(43);
        assert_ne!(a, c);
    }

    #[test]
    fn generation_vocabulary_keeps_pins() {
        let vocab = generation_vocabulary();
        for (kind, value, code) in crate::domain::PINNED_CODES {
            assert_eq!(vocab.code_of_text(kind, value), Some(code));
        }
        for (kind, &size) in AttributeKind::ALL.iter().zip(&GENERATION_SIZES) {
            assert_eq!(vocab.size(*kind), size);
        }
    }

    #[test]
    fn bad_arguments() {
        let vocab = tiny_vocab();
        assert!(generate_corpus(&[], 1, 0.0, 0, &vocab).is_err());
        assert!(generate_corpus(&[template(1, &[])], 0, 0.0, 0, &vocab).is_err());
        assert!(generate_corpus(&[template(1, &[])], 1, 1.5, 0, &vocab).is_err());
        let mut bad = template(1, &[]);
        bad.canonical_codes[0] = 5;
        assert!(matches!(
            generate_corpus(&[bad], 1, 0.0, 0, &vocab),
            Err(Error::CodeOutOfRange { .. })
        ));
    }

    #[test]
    fn template_text_round_trip() {
        let templates = default_templates();
        let text = templates_to_text(&templates);
        assert!(text.starts_with(TEMPLATE_HEADER));
        let back = templates_from_text(&text).unwrap();
        assert_eq!(back, templates);
        assert_eq!(templates_to_text(&back), text);
        assert!(templates_from_text("1,0,0,0,0,0,0,0,0,0,0,0,0,00000000000\n").is_err());
        assert!(templates_from_text("1,0,0,0,0,0,0,0,0,0,0,0,0,000000000002\n").is_err());
    }

    #[test]
    fn nearest_template_classifies_noise_free_corpus() {
        let templates = default_templates();
        let vocab = generation_vocabulary();
        let corpus = generate_corpus(&templates, 3, 0.0, 9, &vocab).unwrap();
        for r in corpus.records() {
            let nearest = templates
                .iter()
                .min_by_key(|t| t.canonical_codes.iter().zip(&r.codes).filter(|(a, b)| a != b).count())
                .unwrap();
            assert_eq!(nearest.pattern_id, r.pattern_id);
        }
    }
}

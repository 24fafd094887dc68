//! Attack-scenario domain types: the twelve-attribute schema, per-attribute
//! vocabularies, the attack-pattern catalog, and scenario validation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of attributes describing an attack scenario.
pub const N_ATTRIBUTES: usize = 12;

/// One of the twelve attack attributes, in schema order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttributeKind {
    Attacker,
    Source,
    Target,
    AttackVector,
    AttackType,
    InputValidation,
    Dependencies,
    OutputEncoding,
    Authentication,
    AccessControl,
    HttpSecurity,
    ErrorHandling,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; N_ATTRIBUTES] = [
        AttributeKind::Attacker,
        AttributeKind::Source,
        AttributeKind::Target,
        AttributeKind::AttackVector,
        AttributeKind::AttackType,
        AttributeKind::InputValidation,
        AttributeKind::Dependencies,
        AttributeKind::OutputEncoding,
        AttributeKind::Authentication,
        AttributeKind::AccessControl,
        AttributeKind::HttpSecurity,
        AttributeKind::ErrorHandling,
    ];

    /// 1-based position in the schema.
    pub fn ordinal(self) -> u8 {
        self.index() as u8 + 1
    }

    /// 0-based position in the schema.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        match ordinal {
            1..=12 => Some(Self::ALL[ordinal as usize - 1]),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::Attacker => "Attacker",
            AttributeKind::Source => "Source",
            AttributeKind::Target => "Target",
            AttributeKind::AttackVector => "AttackVector",
            AttributeKind::AttackType => "AttackType",
            AttributeKind::InputValidation => "InputValidation",
            AttributeKind::Dependencies => "Dependencies",
            AttributeKind::OutputEncoding => "OutputEncoding",
            AttributeKind::Authentication => "Authentication",
            AttributeKind::AccessControl => "AccessControl",
            AttributeKind::HttpSecurity => "HttpSecurity",
            AttributeKind::ErrorHandling => "ErrorHandling",
        }
    }

    /// Column name used in corpus headers.
    pub fn column(self) -> &'static str {
        match self {
            AttributeKind::Attacker => "attacker",
            AttributeKind::Source => "source",
            AttributeKind::Target => "target",
            AttributeKind::AttackVector => "vector",
            AttributeKind::AttackType => "type",
            AttributeKind::InputValidation => "input_validation",
            AttributeKind::Dependencies => "dependencies",
            AttributeKind::OutputEncoding => "output_encoding",
            AttributeKind::Authentication => "authentication",
            AttributeKind::AccessControl => "access_control",
            AttributeKind::HttpSecurity => "http_security",
            AttributeKind::ErrorHandling => "error_handling",
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttributeKind {
    type Err = String;

    /// Accepts the kind name, the corpus column name, or the ordinal, ignoring
    /// case, underscores, hyphens and spaces.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        if let Ok(ordinal) = key.parse::<u8>() {
            return Self::from_ordinal(ordinal).ok_or_else(|| format!("no attribute with ordinal {ordinal}"));
        }
        let alias = match key.as_str() {
            "error" => Some(AttributeKind::ErrorHandling),
            "http" => Some(AttributeKind::HttpSecurity),
            _ => None,
        };
        alias
            .or_else(|| {
                Self::ALL
                    .into_iter()
                    .find(|k| k.name().to_lowercase() == key || k.column().replace('_', "") == key)
            })
            .ok_or_else(|| format!("unknown attribute kind {s:?}"))
    }
}

/// A categorical attribute value such as `"No Access"`.
///
/// The original (trimmed) text is kept for display; equality and hashing use
/// the case-folded, whitespace-collapsed form.
#[derive(Debug, Clone)]
pub struct AttributeValue {
    text: String,
    key: String,
}

impl AttributeValue {
    /// Returns `None` when the text is empty after trimming or contains a
    /// line break.
    pub fn new(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.is_empty() || text.contains(['\n', '\r']) {
            return None;
        }
        Some(AttributeValue {
            text: text.to_string(),
            key: normalize_value(text),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Normalized comparison key.
    pub fn key(&self) -> &str {
        &self.key
    }
}

impl PartialEq for AttributeValue {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for AttributeValue {}

impl std::hash::Hash for AttributeValue {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn normalize_value(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Value/code pairs every shipped vocabulary honors.
pub const PINNED_CODES: [(AttributeKind, &str, u32); N_ATTRIBUTES] = [
    (AttributeKind::Attacker, "No Access", 0),
    (AttributeKind::Source, "External", 1),
    (AttributeKind::Target, "Buffer", 9),
    (AttributeKind::AttackVector, "Long Get Request", 39),
    (AttributeKind::AttackType, "Availability", 5),
    (AttributeKind::InputValidation, "Partial Validation", 2),
    (AttributeKind::Dependencies, "Authentication & Input Validation", 6),
    (AttributeKind::OutputEncoding, "None", 0),
    (AttributeKind::Authentication, "None", 0),
    (AttributeKind::AccessControl, "URL Access", 2),
    (AttributeKind::HttpSecurity, "Input Validation", 3),
    (AttributeKind::ErrorHandling, "None", 0),
];

/// Per-attribute mapping between value strings and dense integer codes.
///
/// A value's code is its position in its kind's list, so codes are always
/// `0..size` with no gaps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    values: [Vec<AttributeValue>; N_ATTRIBUTES],
    index: [HashMap<String, u32>; N_ATTRIBUTES],
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shipped vocabulary: each pinned value sits at its pinned code,
    /// preceded by `unassigned <column> <n>` placeholder slots.
    pub fn pinned() -> Self {
        let mut vocab = Vocabulary::new();
        for (kind, value, code) in PINNED_CODES {
            for slot in 0..code {
                let placeholder = format!("unassigned {} {slot}", kind.column());
                vocab.register(kind, &AttributeValue::new(&placeholder).expect("placeholder"));
            }
            let assigned = vocab.register(kind, &AttributeValue::new(value).expect("pinned value"));
            debug_assert_eq!(assigned, code);
        }
        vocab
    }

    /// Returns the existing code of `value`, or appends it and returns the
    /// new code.
    pub fn register(&mut self, kind: AttributeKind, value: &AttributeValue) -> u32 {
        let i = kind.index();
        if let Some(&code) = self.index[i].get(value.key()) {
            return code;
        }
        let code = self.values[i].len() as u32;
        self.index[i].insert(value.key().to_string(), code);
        self.values[i].push(value.clone());
        code
    }

    /// Convenience wrapper over [`Vocabulary::register`] for raw text.
    pub fn register_text(&mut self, kind: AttributeKind, text: &str) -> Option<u32> {
        AttributeValue::new(text).map(|v| self.register(kind, &v))
    }

    pub fn code_of(&self, kind: AttributeKind, value: &AttributeValue) -> Option<u32> {
        self.index[kind.index()].get(value.key()).copied()
    }

    pub fn code_of_text(&self, kind: AttributeKind, text: &str) -> Option<u32> {
        self.index[kind.index()].get(&normalize_value(text)).copied()
    }

    pub fn value_of(&self, kind: AttributeKind, code: u32) -> Option<&AttributeValue> {
        self.values[kind.index()].get(code as usize)
    }

    pub fn size(&self, kind: AttributeKind) -> usize {
        self.values[kind.index()].len()
    }

    pub fn values(&self, kind: AttributeKind) -> &[AttributeValue] {
        &self.values[kind.index()]
    }

    /// `(kind, code, value)` triples in file order.
    pub fn entries(&self) -> impl Iterator<Item = (AttributeKind, u32, &AttributeValue)> {
        AttributeKind::ALL.into_iter().flat_map(move |kind| {
            self.values(kind)
                .iter()
                .enumerate()
                .map(move |(code, value)| (kind, code as u32, value))
        })
    }

    /// First 16 hex digits of the SHA-256 of the serialized vocabulary.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# kind,code,value\n");
        for (kind, code, value) in self.entries() {
            out.push_str(&format!("{},{},{}\n", kind.ordinal(), code, value.text()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut by_kind: [BTreeMap<u32, (usize, AttributeValue)>; N_ATTRIBUTES] = Default::default();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, ',');
            let (Some(kind), Some(code), Some(value)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(line_no, "expected `<kind-ordinal>,<code>,<value>`"));
            };
            let kind = kind
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(AttributeKind::from_ordinal)
                .ok_or_else(|| Error::parse(line_no, format!("invalid kind ordinal {kind:?}")))?;
            let code: u32 = code
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid code {code:?}")))?;
            let value = AttributeValue::new(value).ok_or_else(|| Error::parse(line_no, "empty attribute value"))?;
            if by_kind[kind.index()].insert(code, (line_no, value)).is_some() {
                return Err(Error::parse(line_no, format!("duplicate code {code} for {kind}")));
            }
        }

        let mut vocab = Vocabulary::new();
        for kind in AttributeKind::ALL {
            for (expected, (code, (line_no, value))) in by_kind[kind.index()].iter().enumerate() {
                if *code as usize != expected {
                    return Err(Error::parse(
                        *line_no,
                        format!("{kind} codes are not dense: found {code}, expected {expected}"),
                    ));
                }
                if vocab.code_of(kind, value).is_some() {
                    return Err(Error::parse(
                        *line_no,
                        format!("duplicate {kind} value {:?}", value.text()),
                    ));
                }
                vocab.register(kind, value);
            }
        }
        Ok(vocab)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// A regularly expressed attack pattern: an ordered chain of actors and
/// software components, e.g. `(User)(HTTPServer)(GetMethod)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackPattern {
    pub id: u32,
    pub components: Vec<String>,
    pub description: String,
}

impl AttackPattern {
    pub fn new(id: u32, components: Vec<String>, description: impl Into<String>) -> Result<Self> {
        if id == 0 {
            return Err(Error::Config("attack pattern ids start at 1".into()));
        }
        if components.is_empty() || components.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::Config(format!(
                "pattern {id} needs at least one non-empty component"
            )));
        }
        Ok(AttackPattern {
            id,
            components,
            description: description.into(),
        })
    }

    /// Parses `(A)(B)(C)` into its components.
    pub fn parse_expression(expression: &str) -> Option<Vec<String>> {
        let mut components = Vec::new();
        let mut rest = expression.trim();
        while !rest.is_empty() {
            let inner = rest.strip_prefix('(')?;
            let close = inner.find(')')?;
            let component = inner[..close].trim();
            if component.is_empty() {
                return None;
            }
            components.push(component.to_string());
            rest = inner[close + 1..].trim_start();
        }
        (!components.is_empty()).then_some(components)
    }

    pub fn expression(&self) -> String {
        self.components.iter().map(|c| format!("({c})")).collect()
    }
}

/// Attack patterns keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternCatalog {
    patterns: BTreeMap<u32, AttackPattern>,
}

/// Highest pattern id in the shipped catalog.
pub const DEFAULT_CATALOG_SIZE: u32 = 53;

impl PatternCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Patterns 1..=53. Only pattern 3 carries a real component chain; the
    /// rest hold a single `Unspecified` component.
    pub fn shipped() -> Self {
        let mut catalog = PatternCatalog::new();
        for id in 1..=DEFAULT_CATALOG_SIZE {
            let pattern = if id == 3 {
                AttackPattern::new(
                    3,
                    AttackPattern::parse_expression("(User)(HTTPServer)(GetMethod)(GetMethodBufferWrite)(Buffer)")
                        .expect("valid expression"),
                    "A user submits an excessively long HTTP GET request to a web server, overflowing a buffer",
                )
            } else {
                AttackPattern::new(id, vec!["Unspecified".to_string()], "")
            };
            catalog.insert(pattern.expect("valid pattern")).expect("unique id");
        }
        catalog
    }

    pub fn insert(&mut self, pattern: AttackPattern) -> Result<()> {
        if self.patterns.contains_key(&pattern.id) {
            return Err(Error::Config(format!("duplicate attack pattern id {}", pattern.id)));
        }
        self.patterns.insert(pattern.id, pattern);
        Ok(())
    }

    pub fn get(&self, id: u32) -> Option<&AttackPattern> {
        self.patterns.get(&id)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.patterns.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AttackPattern> {
        self.patterns.values()
    }
}

/// One problem found by [`AttackScenario::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingAttribute(AttributeKind),
    UnknownValue { kind: AttributeKind, value: String },
    UnknownPattern(u32),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingAttribute(kind) => write!(f, "missing {kind} attribute"),
            Violation::UnknownValue { kind, value } => write!(f, "unknown {kind} value {value:?}"),
            Violation::UnknownPattern(id) => write!(f, "unknown attack pattern {id}"),
        }
    }
}

/// A concrete attack instance described over the twelve attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackScenario {
    pub scenario_id: String,
    values: [Option<AttributeValue>; N_ATTRIBUTES],
    pub pattern_id: Option<u32>,
}

impl AttackScenario {
    pub fn new(scenario_id: impl Into<String>) -> Self {
        AttackScenario {
            scenario_id: scenario_id.into(),
            values: Default::default(),
            pattern_id: None,
        }
    }

    /// Builds a scenario from twelve value strings in schema order.
    pub fn from_texts(scenario_id: impl Into<String>, texts: [&str; N_ATTRIBUTES], pattern_id: Option<u32>) -> Self {
        let mut scenario = AttackScenario::new(scenario_id);
        for (kind, text) in AttributeKind::ALL.into_iter().zip(texts) {
            if let Some(value) = AttributeValue::new(text) {
                scenario.set(kind, value);
            }
        }
        scenario.pattern_id = pattern_id;
        scenario
    }

    /// Sets the value for `kind`, returning the previous one.
    pub fn set(&mut self, kind: AttributeKind, value: AttributeValue) -> Option<AttributeValue> {
        self.values[kind.index()].replace(value)
    }

    pub fn get(&self, kind: AttributeKind) -> Option<&AttributeValue> {
        self.values[kind.index()].as_ref()
    }

    /// Reports every violation rather than stopping at the first.
    pub fn validate(&self, vocab: &Vocabulary, catalog: &PatternCatalog) -> std::result::Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        for kind in AttributeKind::ALL {
            match self.get(kind) {
                None => violations.push(Violation::MissingAttribute(kind)),
                Some(value) if vocab.code_of(kind, value).is_none() => violations.push(Violation::UnknownValue {
                    kind,
                    value: value.text().to_string(),
                }),
                Some(_) => {}
            }
        }
        if let Some(id) = self.pattern_id {
            if !catalog.contains(id) {
                violations.push(Violation::UnknownPattern(id));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

/// The webmail attack (CVE-2003-1192) abstracted over the schema.
pub fn webmail_scenario() -> AttackScenario {
    AttackScenario::from_texts(
        "CVE-2003-1192",
        [
            "No Access",
            "External",
            "Buffer",
            "Long Get Request",
            "Availability",
            "Partial Validation",
            "Authentication & Input Validation",
            "None",
            "None",
            "URL Access",
            "Input Validation",
            "None",
        ],
        Some(3),
    )
}

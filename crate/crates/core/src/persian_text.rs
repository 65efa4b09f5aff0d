//! Persian Unicode primitives and the static resources used by the error
//! modules: a keyboard layout with key adjacency, letter confusion groups,
//! the Persian to Arabic code point map, silent-letter patterns and common
//! confusion pairs.
//!
//! Both resource documents are plain UTF-8 text. The defaults ship with the
//! crate and can be replaced at run time.
//!
//! Layout document:
//!
//! ```text
//! # comment
//! offset 0 0
//! row 0 ض ص ث ...
//! offset 1 0.5
//! row 1 ش س ی ...
//! ```
//!
//! Tables document, with sections `[sound]`, `[shape]` (one space-separated
//! group per line), `[fa2ar]` and `[confusion]` (tab-separated pairs) and
//! `[silent]` (trigger, tab, index of the silent character in the trigger).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Zero-width non-joiner, the Persian pseudo-space.
pub const ZWNJ: char = '\u{200C}';
/// Plain white space.
pub const WHITE_SPACE: char = ' ';

pub const DEFAULT_LAYOUT: &str = include_str!("../resources/layout.txt");
pub const DEFAULT_TABLES: &str = include_str!("../resources/tables.txt");

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("character {0:?} appears in more than one layout cell")]
    DuplicateKey(char),
    #[error("character {ch:?} appears in more than one {kind} group")]
    GroupOverlap { kind: &'static str, ch: char },
    #[error("character {0:?} is not on the keyboard layout")]
    NotInLayout(char),
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_err(line: usize, message: impl Into<String>) -> ResourceError {
    ResourceError::Parse {
        line,
        message: message.into(),
    }
}

/// The three separators that can sit between Persian letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeparatorKind {
    WhiteSpace,
    PseudoSpace,
    Empty,
}

impl SeparatorKind {
    pub const ALL: [SeparatorKind; 3] = [Self::WhiteSpace, Self::PseudoSpace, Self::Empty];

    /// The code point written for this separator, `None` for the empty one.
    pub fn code_point(self) -> Option<char> {
        match self {
            Self::WhiteSpace => Some(WHITE_SPACE),
            Self::PseudoSpace => Some(ZWNJ),
            Self::Empty => None,
        }
    }
}

/// Which family of letter confusion to consult.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfusionKind {
    Sound,
    Shape,
}

impl ConfusionKind {
    fn section(self) -> &'static str {
        match self {
            Self::Sound => "sound",
            Self::Shape => "shape",
        }
    }
}

/// A staggered keyboard: rows of keys, each row shifted right by its offset
/// (in half-key units).
#[derive(Debug, Clone, PartialEq)]
pub struct KeyboardLayout {
    rows: Vec<Vec<char>>,
    offsets: Vec<f64>,
    positions: HashMap<char, (usize, usize)>,
    neighbors: HashMap<char, Vec<char>>,
}

impl KeyboardLayout {
    pub fn new(rows: Vec<Vec<char>>, offsets: Vec<f64>) -> Result<Self, ResourceError> {
        if rows.is_empty() {
            return Err(ResourceError::Invalid("layout has no rows".into()));
        }
        if offsets.len() != rows.len() {
            return Err(ResourceError::Invalid(format!(
                "{} rows but {} offsets",
                rows.len(),
                offsets.len()
            )));
        }
        let mut positions = HashMap::new();
        for (r, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(ResourceError::Invalid(format!("row {r} is empty")));
            }
            if !offsets[r].is_finite() {
                return Err(ResourceError::Invalid(format!("offset of row {r} is not finite")));
            }
            for (c, &ch) in row.iter().enumerate() {
                if positions.insert(ch, (r, c)).is_some() {
                    return Err(ResourceError::DuplicateKey(ch));
                }
            }
        }
        let mut layout = Self {
            rows,
            offsets,
            positions,
            neighbors: HashMap::new(),
        };
        let mut neighbors = HashMap::new();
        for &ch in layout.positions.keys() {
            let mut near: Vec<char> = layout
                .positions
                .keys()
                .copied()
                .filter(|&other| other != ch && layout.within_reach(ch, other))
                .collect();
            near.sort_unstable();
            neighbors.insert(ch, near);
        }
        layout.neighbors = neighbors;
        Ok(layout)
    }

    /// Parse the layout document.
    pub fn parse(text: &str) -> Result<Self, ResourceError> {
        let mut rows: BTreeMap<usize, Vec<char>> = BTreeMap::new();
        let mut offsets: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r').trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let keyword = fields.next().unwrap_or_default();
            let index: usize = fields
                .next()
                .ok_or_else(|| parse_err(line_no, "missing row index"))?
                .parse()
                .map_err(|_| parse_err(line_no, "row index is not an integer"))?;
            match keyword {
                "offset" => {
                    let value: f64 = fields
                        .next()
                        .ok_or_else(|| parse_err(line_no, "missing offset value"))?
                        .parse()
                        .map_err(|_| parse_err(line_no, "offset is not a number"))?;
                    if fields.next().is_some() {
                        return Err(parse_err(line_no, "trailing fields after offset"));
                    }
                    if offsets.insert(index, value).is_some() {
                        return Err(parse_err(line_no, format!("offset {index} given twice")));
                    }
                }
                "row" => {
                    let mut keys = Vec::new();
                    for field in fields {
                        let mut chars = field.chars();
                        match (chars.next(), chars.next()) {
                            (Some(ch), None) => keys.push(ch),
                            _ => {
                                return Err(parse_err(
                                    line_no,
                                    format!("key {field:?} is not a single character"),
                                ))
                            }
                        }
                    }
                    if rows.insert(index, keys).is_some() {
                        return Err(parse_err(line_no, format!("row {index} given twice")));
                    }
                }
                other => return Err(parse_err(line_no, format!("unknown keyword {other:?}"))),
            }
        }
        if let Some((&bad, _)) = offsets.iter().find(|(k, _)| !rows.contains_key(k)) {
            return Err(ResourceError::Invalid(format!("offset for missing row {bad}")));
        }
        for (expected, &index) in rows.keys().enumerate() {
            if index != expected {
                return Err(ResourceError::Invalid(format!("row {expected} is missing")));
            }
        }
        let offs = rows
            .keys()
            .map(|k| offsets.get(k).copied().unwrap_or(0.0))
            .collect();
        Self::new(rows.into_values().collect(), offs)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (r, row) in self.rows.iter().enumerate() {
            let keys: Vec<String> = row.iter().map(char::to_string).collect();
            let _ = writeln!(out, "offset {r} {}", self.offsets[r]);
            let _ = writeln!(out, "row {r} {}", keys.join(" "));
        }
        out
    }

    pub fn rows(&self) -> &[Vec<char>] {
        &self.rows
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn contains(&self, ch: char) -> bool {
        self.positions.contains_key(&ch)
    }

    /// `(row, x)` of the key center, with `x = column + offset / 2`.
    pub fn key_center(&self, ch: char) -> Option<(usize, f64)> {
        self.positions
            .get(&ch)
            .map(|&(r, c)| (r, c as f64 + self.offsets[r] / 2.0))
    }

    fn within_reach(&self, a: char, b: char) -> bool {
        match (self.key_center(a), self.key_center(b)) {
            (Some((ra, xa)), Some((rb, xb))) => ra.abs_diff(rb) <= 1 && (xa - xb).abs() <= 1.0,
            _ => false,
        }
    }

    /// Keys touching `ch`, sorted by code point; empty when `ch` is not a key.
    pub fn neighbors(&self, ch: char) -> &[char] {
        self.neighbors.get(&ch).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All keys whose centers are at most one row and one key width away.
    pub fn adjacent_keys(&self, ch: char) -> Result<BTreeSet<char>, ResourceError> {
        self.neighbors
            .get(&ch)
            .map(|n| n.iter().copied().collect())
            .ok_or(ResourceError::NotInLayout(ch))
    }

    pub fn keys(&self) -> impl Iterator<Item = char> + '_ {
        self.rows.iter().flatten().copied()
    }
}

/// A silent letter rule: wherever `trigger` occurs, the character at
/// `index` inside it may be dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilentPattern {
    pub trigger: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionTables {
    pub sound_groups: Vec<Vec<char>>,
    pub shape_groups: Vec<Vec<char>>,
    pub fa_to_ar: BTreeMap<char, char>,
    pub silent_patterns: Vec<SilentPattern>,
    pub common_confusions: Vec<(String, String)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Sound,
    Shape,
    FaToAr,
    Silent,
    Confusion,
}

impl ConfusionTables {
    pub fn validate(&self) -> Result<(), ResourceError> {
        for kind in [ConfusionKind::Sound, ConfusionKind::Shape] {
            let mut seen = BTreeSet::new();
            for group in self.groups(kind) {
                if group.len() < 2 {
                    return Err(ResourceError::Invalid(format!(
                        "{} group {group:?} has fewer than two members",
                        kind.section()
                    )));
                }
                let unique: BTreeSet<char> = group.iter().copied().collect();
                if unique.len() != group.len() {
                    return Err(ResourceError::Invalid(format!(
                        "{} group {group:?} repeats a member",
                        kind.section()
                    )));
                }
                for &ch in group {
                    if !seen.insert(ch) {
                        return Err(ResourceError::GroupOverlap {
                            kind: kind.section(),
                            ch,
                        });
                    }
                }
            }
        }
        for (&from, &to) in &self.fa_to_ar {
            if from == to || self.fa_to_ar.contains_key(&to) {
                return Err(ResourceError::Invalid(format!(
                    "fa2ar maps {from:?} to {to:?}, which is also a source character"
                )));
            }
        }
        for pattern in &self.silent_patterns {
            if pattern.index >= pattern.trigger.chars().count() {
                return Err(ResourceError::Invalid(format!(
                    "silent index {} is outside trigger {:?}",
                    pattern.index, pattern.trigger
                )));
            }
        }
        for (pattern, replacement) in &self.common_confusions {
            if pattern.is_empty() || pattern == replacement {
                return Err(ResourceError::Invalid(format!(
                    "confusion pair {pattern:?} -> {replacement:?} is not an edit"
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ResourceError> {
        let mut tables = ConfusionTables {
            sound_groups: Vec::new(),
            shape_groups: Vec::new(),
            fa_to_ar: BTreeMap::new(),
            silent_patterns: Vec::new(),
            common_confusions: Vec::new(),
        };
        let mut section = Section::None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                section = match line.trim() {
                    "[sound]" => Section::Sound,
                    "[shape]" => Section::Shape,
                    "[fa2ar]" => Section::FaToAr,
                    "[silent]" => Section::Silent,
                    "[confusion]" => Section::Confusion,
                    other => return Err(parse_err(line_no, format!("unknown section {other}"))),
                };
                continue;
            }
            match section {
                Section::None => return Err(parse_err(line_no, "entry outside of any section")),
                Section::Sound | Section::Shape => {
                    let mut group = Vec::new();
                    for field in line.split(' ').filter(|f| !f.is_empty()) {
                        let mut chars = field.chars();
                        match (chars.next(), chars.next()) {
                            (Some(ch), None) => group.push(ch),
                            _ => {
                                return Err(parse_err(
                                    line_no,
                                    format!("group member {field:?} is not a single character"),
                                ))
                            }
                        }
                    }
                    if section == Section::Sound {
                        tables.sound_groups.push(group);
                    } else {
                        tables.shape_groups.push(group);
                    }
                }
                Section::FaToAr => {
                    let (from, to) = split_pair(line, line_no)?;
                    let (from, to) = match (single_char(from), single_char(to)) {
                        (Some(a), Some(b)) => (a, b),
                        _ => return Err(parse_err(line_no, "fa2ar entries are single characters")),
                    };
                    if tables.fa_to_ar.insert(from, to).is_some() {
                        return Err(parse_err(line_no, format!("{from:?} mapped twice")));
                    }
                }
                Section::Silent => {
                    let (trigger, index) = split_pair(line, line_no)?;
                    let index = index
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(line_no, "silent index is not an integer"))?;
                    tables.silent_patterns.push(SilentPattern {
                        trigger: trigger.to_string(),
                        index,
                    });
                }
                Section::Confusion => {
                    let (pattern, replacement) = split_pair(line, line_no)?;
                    tables
                        .common_confusions
                        .push((pattern.to_string(), replacement.to_string()));
                }
            }
        }
        tables.validate()?;
        Ok(tables)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let group_line = |g: &Vec<char>| g.iter().map(char::to_string).collect::<Vec<_>>().join(" ");
        out.push_str("[sound]\n");
        for g in &self.sound_groups {
            let _ = writeln!(out, "{}", group_line(g));
        }
        out.push_str("[shape]\n");
        for g in &self.shape_groups {
            let _ = writeln!(out, "{}", group_line(g));
        }
        out.push_str("[fa2ar]\n");
        for (from, to) in &self.fa_to_ar {
            let _ = writeln!(out, "{from}\t{to}");
        }
        out.push_str("[silent]\n");
        for p in &self.silent_patterns {
            let _ = writeln!(out, "{}\t{}", p.trigger, p.index);
        }
        out.push_str("[confusion]\n");
        for (pattern, replacement) in &self.common_confusions {
            let _ = writeln!(out, "{pattern}\t{replacement}");
        }
        out
    }

    pub fn groups(&self, kind: ConfusionKind) -> &[Vec<char>] {
        match kind {
            ConfusionKind::Sound => &self.sound_groups,
            ConfusionKind::Shape => &self.shape_groups,
        }
    }

    /// The other members of `ch`'s group of the given kind, in table order.
    pub fn confusables(&self, kind: ConfusionKind, ch: char) -> Vec<char> {
        self.groups(kind)
            .iter()
            .find(|g| g.contains(&ch))
            .map(|g| g.iter().copied().filter(|&c| c != ch).collect())
            .unwrap_or_default()
    }
}

fn split_pair(line: &str, line_no: usize) -> Result<(&str, &str), ResourceError> {
    let mut parts = line.split('\t');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => Ok((a, b)),
        _ => Err(parse_err(line_no, "expected two tab-separated fields")),
    }
}

fn single_char(s: &str) -> Option<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// The layout and tables together, as every error module needs both.
#[derive(Debug, Clone, PartialEq)]
pub struct Resources {
    pub layout: KeyboardLayout,
    pub tables: ConfusionTables,
}

impl Resources {
    pub fn load(layout_text: &str, tables_text: &str) -> Result<Self, ResourceError> {
        Ok(Self {
            layout: KeyboardLayout::parse(layout_text)?,
            tables: ConfusionTables::parse(tables_text)?,
        })
    }

    /// Load `layout.txt` and `tables.txt` from a directory.
    pub fn from_dir(dir: &Path) -> Result<Self, ResourceError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| ResourceError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        Self::load(&read("layout.txt")?, &read("tables.txt")?)
    }
}

impl Default for Resources {
    fn default() -> Self {
        Self::load(DEFAULT_LAYOUT, DEFAULT_TABLES).expect("shipped resources are valid")
    }
}

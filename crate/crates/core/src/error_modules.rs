//! Atomic word-corruption operations, one per error tag.
//!
//! Every operation enumerates the legal edit sites of the word, draws one
//! site uniformly, then draws one replacement uniformly among the legal
//! choices at that site. A word without any legal site yields
//! [`ApplyOutcome::NotApplicable`]; a [`ApplyOutcome::Changed`] word always
//! differs from its input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::persian_text::{ConfusionKind, Resources, SeparatorKind, WHITE_SPACE, ZWNJ};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorTag {
    Insertion,
    Deletion,
    Substitution,
    Transposition,
    SoundSimilarity,
    ShapeSimilarity,
    Repetition,
    SpacePseudoToWhite,
    SpacePseudoToEmpty,
    SpaceWhiteToPseudo,
    SpaceWhiteToEmpty,
    SpaceEmptyToPseudo,
    SpaceEmptyToWhite,
    FaToAr,
    SilentLetter,
    CommonConfusion,
}

impl ErrorTag {
    pub const ALL: [ErrorTag; 16] = [
        Self::Insertion,
        Self::Deletion,
        Self::Substitution,
        Self::Transposition,
        Self::SoundSimilarity,
        Self::ShapeSimilarity,
        Self::Repetition,
        Self::SpacePseudoToWhite,
        Self::SpacePseudoToEmpty,
        Self::SpaceWhiteToPseudo,
        Self::SpaceWhiteToEmpty,
        Self::SpaceEmptyToPseudo,
        Self::SpaceEmptyToWhite,
        Self::FaToAr,
        Self::SilentLetter,
        Self::CommonConfusion,
    ];

    /// Stable serialization code, 0 to 15.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Name used in the `typo_type` column.
    pub fn name(self) -> &'static str {
        match self {
            Self::Insertion => "insertion",
            Self::Deletion => "deletion",
            Self::Substitution => "substitution",
            Self::Transposition => "transposition",
            Self::SoundSimilarity => "sound similarity",
            Self::ShapeSimilarity => "shape similarity",
            Self::Repetition => "repetition",
            Self::SpacePseudoToWhite => "pseudo space to white space",
            Self::SpacePseudoToEmpty => "pseudo space to empty",
            Self::SpaceWhiteToPseudo => "white space to pseudo space",
            Self::SpaceWhiteToEmpty => "white space to empty",
            Self::SpaceEmptyToPseudo => "empty to pseudo space",
            Self::SpaceEmptyToWhite => "empty to white space",
            Self::FaToAr => "persian to arabic",
            Self::SilentLetter => "silent letter",
            Self::CommonConfusion => "common confusion",
        }
    }

    /// Source and target separator for the six spacing tags.
    pub fn spacing(self) -> Option<(SeparatorKind, SeparatorKind)> {
        use SeparatorKind::*;
        match self {
            Self::SpacePseudoToWhite => Some((PseudoSpace, WhiteSpace)),
            Self::SpacePseudoToEmpty => Some((PseudoSpace, Empty)),
            Self::SpaceWhiteToPseudo => Some((WhiteSpace, PseudoSpace)),
            Self::SpaceWhiteToEmpty => Some((WhiteSpace, Empty)),
            Self::SpaceEmptyToPseudo => Some((Empty, PseudoSpace)),
            Self::SpaceEmptyToWhite => Some((Empty, WhiteSpace)),
            _ => None,
        }
    }

    /// Apply this tag's corruption to `word`.
    pub fn apply(self, word: &str, rng: &mut RngStream, res: &Resources) -> ApplyOutcome {
        match self {
            Self::Insertion => apply_insertion(word, rng, res),
            Self::Deletion => apply_deletion(word, rng),
            Self::Substitution => apply_substitution(word, rng, res),
            Self::Transposition => apply_transposition(word, rng),
            Self::SoundSimilarity => apply_similarity(word, ConfusionKind::Sound, rng, res),
            Self::ShapeSimilarity => apply_similarity(word, ConfusionKind::Shape, rng, res),
            Self::Repetition => apply_repetition(word, rng),
            Self::FaToAr => apply_fa_to_ar(word, rng, res),
            Self::SilentLetter => apply_silent_letter(word, rng, res),
            Self::CommonConfusion => apply_common_confusion(word, rng, res),
            spacing => apply_spacing(word, spacing, rng),
        }
    }
}

impl fmt::Display for ErrorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownTag(pub String);

impl fmt::Display for UnknownTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown error tag {:?}", self.0)
    }
}

impl std::error::Error for UnknownTag {}

impl FromStr for ErrorTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| UnknownTag(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyOutcome {
    Changed(String),
    NotApplicable,
}

impl ApplyOutcome {
    pub fn changed(self) -> Option<String> {
        match self {
            Self::Changed(w) => Some(w),
            Self::NotApplicable => None,
        }
    }

    pub fn is_changed(&self) -> bool {
        matches!(self, Self::Changed(_))
    }
}

fn is_letter(ch: char) -> bool {
    ch.is_alphabetic()
}

/// Draw a site, then one of its choices. `sites` must hold no empty choice list.
fn pick<'a, S, C>(sites: &'a [(S, Vec<C>)], rng: &mut RngStream) -> Option<(&'a S, &'a C)> {
    let (site, choices) = rng.choose(sites)?;
    let choice = rng.choose(choices)?;
    Some((site, choice))
}

/// Insert a key adjacent to its left neighbour (or, at position 0, to the
/// first character), never duplicating either character it lands next to.
pub fn apply_insertion(word: &str, rng: &mut RngStream, res: &Resources) -> ApplyOutcome {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return ApplyOutcome::NotApplicable;
    }
    let mut sites = Vec::new();
    for pos in 0..=chars.len() {
        let anchor = if pos > 0 { chars[pos - 1] } else { chars[0] };
        let left = pos.checked_sub(1).map(|i| chars[i]);
        let right = chars.get(pos).copied();
        let choices: Vec<char> = res
            .layout
            .neighbors(anchor)
            .iter()
            .copied()
            .filter(|&c| Some(c) != left && Some(c) != right)
            .collect();
        if !choices.is_empty() {
            sites.push((pos, choices));
        }
    }
    match pick(&sites, rng) {
        Some((&pos, &ch)) => {
            let mut out = chars;
            out.insert(pos, ch);
            ApplyOutcome::Changed(out.into_iter().collect())
        }
        None => ApplyOutcome::NotApplicable,
    }
}

/// Remove one character. A one-character word becomes the empty string.
pub fn apply_deletion(word: &str, rng: &mut RngStream) -> ApplyOutcome {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return ApplyOutcome::NotApplicable;
    }
    let pos = rng.below(0, chars.len());
    chars.remove(pos);
    ApplyOutcome::Changed(chars.into_iter().collect())
}

/// Replace one character by a key adjacent to it.
pub fn apply_substitution(word: &str, rng: &mut RngStream, res: &Resources) -> ApplyOutcome {
    let chars: Vec<char> = word.chars().collect();
    let sites: Vec<(usize, Vec<char>)> = chars
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| {
            let near = res.layout.neighbors(c);
            (!near.is_empty()).then(|| (i, near.to_vec()))
        })
        .collect();
    replace_one(chars, &sites, rng)
}

fn replace_one(mut chars: Vec<char>, sites: &[(usize, Vec<char>)], rng: &mut RngStream) -> ApplyOutcome {
    match pick(sites, rng) {
        Some((&pos, &ch)) => {
            chars[pos] = ch;
            ApplyOutcome::Changed(chars.into_iter().collect())
        }
        None => ApplyOutcome::NotApplicable,
    }
}

/// Swap one adjacent pair of unequal characters.
pub fn apply_transposition(word: &str, rng: &mut RngStream) -> ApplyOutcome {
    let mut chars: Vec<char> = word.chars().collect();
    let sites: Vec<usize> = chars
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| i)
        .collect();
    match rng.choose(&sites) {
        Some(&i) => {
            chars.swap(i, i + 1);
            ApplyOutcome::Changed(chars.into_iter().collect())
        }
        None => ApplyOutcome::NotApplicable,
    }
}

/// Replace one letter by another member of its sound or shape group.
pub fn apply_similarity(
    word: &str,
    kind: ConfusionKind,
    rng: &mut RngStream,
    res: &Resources,
) -> ApplyOutcome {
    let chars: Vec<char> = word.chars().collect();
    let sites: Vec<(usize, Vec<char>)> = chars
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| {
            let group = res.tables.confusables(kind, c);
            (!group.is_empty()).then_some((i, group))
        })
        .collect();
    replace_one(chars, &sites, rng)
}

/// Repeat one character once or twice right after itself.
pub fn apply_repetition(word: &str, rng: &mut RngStream) -> ApplyOutcome {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return ApplyOutcome::NotApplicable;
    }
    let pos = rng.below(0, chars.len());
    let extra = rng.below(1, 3);
    let ch = chars[pos];
    for _ in 0..extra {
        chars.insert(pos + 1, ch);
    }
    ApplyOutcome::Changed(chars.into_iter().collect())
}

/// One of the six separator confusions. Tags other than the spacing ones
/// are never applicable here.
pub fn apply_spacing(word: &str, variant: ErrorTag, rng: &mut RngStream) -> ApplyOutcome {
    let Some((from, to)) = variant.spacing() else {
        return ApplyOutcome::NotApplicable;
    };
    let mut chars: Vec<char> = word.chars().collect();
    match from.code_point() {
        Some(source) => {
            let sites: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] == source).collect();
            let Some(&pos) = rng.choose(&sites) else {
                return ApplyOutcome::NotApplicable;
            };
            match to.code_point() {
                Some(target) => chars[pos] = target,
                None => {
                    chars.remove(pos);
                }
            }
        }
        None => {
            // Only strictly inside the word, between two letters.
            let sites: Vec<usize> = (1..chars.len())
                .filter(|&i| is_letter(chars[i - 1]) && is_letter(chars[i]))
                .collect();
            let Some(&pos) = rng.choose(&sites) else {
                return ApplyOutcome::NotApplicable;
            };
            let target = to.code_point().unwrap_or(WHITE_SPACE);
            chars.insert(pos, target);
        }
    }
    ApplyOutcome::Changed(chars.into_iter().collect())
}

/// Swap one Persian-only code point for its Arabic counterpart.
pub fn apply_fa_to_ar(word: &str, rng: &mut RngStream, res: &Resources) -> ApplyOutcome {
    let chars: Vec<char> = word.chars().collect();
    let sites: Vec<(usize, Vec<char>)> = chars
        .iter()
        .enumerate()
        .filter_map(|(i, c)| res.tables.fa_to_ar.get(c).map(|&ar| (i, vec![ar])))
        .collect();
    replace_one(chars, &sites, rng)
}

/// Drop the silent character of one trigger occurrence.
pub fn apply_silent_letter(word: &str, rng: &mut RngStream, res: &Resources) -> ApplyOutcome {
    let mut chars: Vec<char> = word.chars().collect();
    let mut sites: Vec<usize> = Vec::new();
    for pattern in &res.tables.silent_patterns {
        let trigger: Vec<char> = pattern.trigger.chars().collect();
        for start in occurrences(&chars, &trigger) {
            sites.push(start + pattern.index);
        }
    }
    sites.sort_unstable();
    sites.dedup();
    match rng.choose(&sites) {
        Some(&pos) => {
            chars.remove(pos);
            ApplyOutcome::Changed(chars.into_iter().collect())
        }
        None => ApplyOutcome::NotApplicable,
    }
}

/// Replace one occurrence of a commonly confused pattern by its pair.
pub fn apply_common_confusion(word: &str, rng: &mut RngStream, res: &Resources) -> ApplyOutcome {
    let chars: Vec<char> = word.chars().collect();
    let mut sites: Vec<(usize, usize)> = Vec::new();
    for (k, (pattern, _)) in res.tables.common_confusions.iter().enumerate() {
        let pattern: Vec<char> = pattern.chars().collect();
        sites.extend(occurrences(&chars, &pattern).map(|start| (k, start)));
    }
    let Some(&(k, start)) = rng.choose(&sites) else {
        return ApplyOutcome::NotApplicable;
    };
    let (pattern, replacement) = &res.tables.common_confusions[k];
    let end = start + pattern.chars().count();
    let mut out: String = chars[..start].iter().collect();
    out.push_str(replacement);
    out.extend(&chars[end..]);
    ApplyOutcome::Changed(out)
}

fn occurrences<'a>(haystack: &'a [char], needle: &'a [char]) -> impl Iterator<Item = usize> + 'a {
    let last = (haystack.len() + 1).saturating_sub(needle.len().max(1));
    (0..last).filter(move |&i| !needle.is_empty() && haystack[i..i + needle.len()] == *needle)
}

/// Characters that separate parts of a multi-part token.
pub fn is_separator(ch: char) -> bool {
    ch == WHITE_SPACE || ch == ZWNJ
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn res() -> Resources {
        Resources::default()
    }

    fn outcomes(n: u64, mut f: impl FnMut(&mut RngStream) -> ApplyOutcome) -> BTreeSet<String> {
        (0..n)
            .filter_map(|seed| f(&mut RngStream::new(seed)).changed())
            .collect()
    }

    #[test]
    fn tag_codes_are_stable() {
        for (i, tag) in ErrorTag::ALL.iter().enumerate() {
            assert_eq!(tag.code() as usize, i);
            assert_eq!(ErrorTag::from_code(i as u8), Some(*tag));
            assert_eq!(tag.name().parse::<ErrorTag>().unwrap(), *tag);
            assert!(!tag.name().contains(','));
        }
        assert_eq!(ErrorTag::from_code(16), None);
    }

    #[test]
    fn insertion_on_excellent_adds_one_key() {
        let r = res();
        for seed in 0..50 {
            let out = apply_insertion("عالی", &mut RngStream::new(seed), &r).changed().unwrap();
            assert_eq!(out.chars().count(), 5);
        }
    }

    #[test]
    fn insertion_needs_layout_characters() {
        assert_eq!(
            apply_insertion("!!", &mut RngStream::new(0), &res()),
            ApplyOutcome::NotApplicable
        );
    }

    #[test]
    fn deletion_of_scaffold_reaches_dar() {
        let seen = outcomes(200, |rng| apply_deletion("دار", rng));
        assert!(seen.contains("در"));
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn deletion_of_single_char_is_empty() {
        assert_eq!(
            apply_deletion("ا", &mut RngStream::new(3)),
            ApplyOutcome::Changed(String::new())
        );
        assert_eq!(apply_deletion("", &mut RngStream::new(3)), ApplyOutcome::NotApplicable);
    }

    #[test]
    fn substitution_reaches_khar() {
        let r = res();
        assert!(r.layout.adjacent_keys('ل').unwrap().contains(&'ر'));
        let seen = outcomes(2000, |rng| apply_substitution("خال", rng, &r));
        assert!(seen.contains("خار"));
        assert_eq!(
            apply_substitution("؟", &mut RngStream::new(0), &r),
            ApplyOutcome::NotApplicable
        );
    }

    #[test]
    fn transposition_of_day() {
        let seen = outcomes(200, |rng| apply_transposition("روز", rng));
        let expected: BTreeSet<String> = ["ورز", "رزو"].iter().map(|s| s.to_string()).collect();
        assert_eq!(seen, expected);
        assert_eq!(apply_transposition("اا", &mut RngStream::new(0)), ApplyOutcome::NotApplicable);
        assert_eq!(apply_transposition("ا", &mut RngStream::new(0)), ApplyOutcome::NotApplicable);
    }

    #[test]
    fn similarity_examples_are_reachable() {
        let r = res();
        let sound = outcomes(500, |rng| apply_similarity("منظومه", ConfusionKind::Sound, rng, &r));
        assert!(sound.contains("منضومه"));
        let shape = outcomes(500, |rng| apply_similarity("ثانویه", ConfusionKind::Shape, rng, &r));
        assert!(shape.contains("تانویه"));
        assert_eq!(
            apply_similarity("ء", ConfusionKind::Shape, &mut RngStream::new(0), &r),
            ApplyOutcome::NotApplicable
        );
    }

    #[test]
    fn repetition_examples() {
        let seen = outcomes(500, |rng| apply_repetition("داودی", rng));
        assert!(seen.contains("داوودی"));
        let single = outcomes(100, |rng| apply_repetition("ب", rng));
        let expected: BTreeSet<String> = ["بب", "ببب"].iter().map(|s| s.to_string()).collect();
        assert_eq!(single, expected);
    }

    #[test]
    fn spacing_examples() {
        let mut rng = RngStream::new(0);
        assert_eq!(
            apply_spacing("بی\u{200C}حوصله", ErrorTag::SpacePseudoToEmpty, &mut rng),
            ApplyOutcome::Changed("بیحوصله".into())
        );
        assert_eq!(
            apply_spacing("کتاب خواندن", ErrorTag::SpaceWhiteToEmpty, &mut rng),
            ApplyOutcome::Changed("کتابخواندن".into())
        );
        assert_eq!(
            apply_spacing("کتاب", ErrorTag::SpacePseudoToWhite, &mut rng),
            ApplyOutcome::NotApplicable
        );
        assert_eq!(
            apply_spacing("کتاب", ErrorTag::Deletion, &mut rng),
            ApplyOutcome::NotApplicable
        );
    }

    #[test]
    fn empty_separator_never_lands_on_a_boundary() {
        for seed in 0..200 {
            let out = apply_spacing("داستان", ErrorTag::SpaceEmptyToWhite, &mut RngStream::new(seed))
                .changed()
                .unwrap();
            assert!(!out.starts_with(' ') && !out.ends_with(' '));
        }
        assert_eq!(
            apply_spacing("ب", ErrorTag::SpaceEmptyToPseudo, &mut RngStream::new(0)),
            ApplyOutcome::NotApplicable
        );
    }

    #[test]
    fn fa_to_ar_on_audacious() {
        let r = res();
        let seen = outcomes(200, |rng| apply_fa_to_ar("بی\u{200C}باک", rng, &r));
        assert!(seen.contains("بی\u{200C}باك"));
        assert!(seen.contains("بي\u{200C}باک"));
        assert_eq!(apply_fa_to_ar("123", &mut RngStream::new(0), &r), ApplyOutcome::NotApplicable);
    }

    #[test]
    fn silent_letter_examples() {
        let r = res();
        let mut rng = RngStream::new(0);
        assert_eq!(
            apply_silent_letter("خواننده", &mut rng, &r),
            ApplyOutcome::Changed("خاننده".into())
        );
        assert_eq!(apply_silent_letter("خواهر", &mut rng, &r), ApplyOutcome::Changed("خاهر".into()));
        assert_eq!(apply_silent_letter("برادر", &mut rng, &r), ApplyOutcome::NotApplicable);
    }

    #[test]
    fn common_confusion_examples() {
        let r = res();
        let mut rng = RngStream::new(0);
        assert_eq!(
            apply_common_confusion("قانونگذار", &mut rng, &r),
            ApplyOutcome::Changed("قانونگزار".into())
        );
        assert_eq!(
            apply_common_confusion("سلام؟", &mut rng, &r),
            ApplyOutcome::Changed("سلام?".into())
        );
        assert_eq!(apply_common_confusion("آب", &mut rng, &r), ApplyOutcome::NotApplicable);
    }

    #[test]
    fn same_seed_same_outcome() {
        let r = res();
        for tag in ErrorTag::ALL {
            let a = tag.apply("می\u{200C}خواهم کتاب", &mut RngStream::new(77), &r);
            let b = tag.apply("می\u{200C}خواهم کتاب", &mut RngStream::new(77), &r);
            assert_eq!(a, b, "{tag}");
        }
    }
}

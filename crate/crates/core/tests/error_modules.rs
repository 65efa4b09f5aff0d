mod common;

use std::collections::BTreeSet;

use common::{adjacency, allowed_deltas, legal_outputs, module_words};
use fatypo::persian_text::ZWNJ;
use fatypo::{ApplyOutcome, ErrorTag, Resources, RngStream};
use proptest::prelude::*;

fn run(tag: ErrorTag, word: &str, seed: u64, res: &Resources) -> ApplyOutcome {
    tag.apply(word, &mut RngStream::derive(seed, &[tag.code() as u64]), res)
}

fn outputs(tag: ErrorTag, word: &str, seeds: u64, res: &Resources) -> BTreeSet<String> {
    (0..seeds)
        .filter_map(|s| run(tag, word, s, res).changed())
        .collect()
}

#[test]
fn every_module_stays_inside_its_oracle_set() {
    let res = Resources::default();
    for word in module_words() {
        let n = word.chars().count() as i64;
        for tag in ErrorTag::ALL {
            let legal = legal_outputs(tag, &word, &res);
            let deltas = allowed_deltas(tag, &res);
            let mut seen = BTreeSet::new();
            for seed in 0..200 {
                match run(tag, &word, seed, &res) {
                    ApplyOutcome::NotApplicable => {
                        assert!(legal.is_empty(), "{tag} refused {word:?}")
                    }
                    ApplyOutcome::Changed(out) => {
                        assert_ne!(out, word, "{tag} returned its input");
                        assert!(legal.contains(&out), "{tag}: {word:?} -> {out:?}");
                        let delta = out.chars().count() as i64 - n;
                        assert!(deltas.contains(&delta), "{tag}: delta {delta}");
                        seen.insert(out);
                    }
                }
            }
            if legal.len() <= 6 {
                assert_eq!(seen, legal, "{tag} on {word:?} misses outputs");
            }
        }
    }
}

#[test]
fn insertion_on_book_is_adjacent() {
    let res = Resources::default();
    let legal = legal_outputs(ErrorTag::Insertion, "کتاب", &res);
    for seed in 0..1000 {
        let out = run(ErrorTag::Insertion, "کتاب", seed, &res).changed().unwrap();
        assert_eq!(out.chars().count(), 5);
        assert!(legal.contains(&out), "{out}");
    }
}

#[test]
fn deletions_of_sister_are_the_five_single_deletions() {
    let res = Resources::default();
    let expected: BTreeSet<String> = (0..5)
        .map(|i| {
            let mut v: Vec<char> = "خواهر".chars().collect();
            v.remove(i);
            v.into_iter().collect()
        })
        .collect();
    assert_eq!(outputs(ErrorTag::Deletion, "خواهر", 500, &res), expected);
}

#[test]
fn transpositions_of_salam() {
    let res = Resources::default();
    let expected: BTreeSet<String> = ["لسام", "سالم", "سلما"].iter().map(|s| s.to_string()).collect();
    assert_eq!(outputs(ErrorTag::Transposition, "سلام", 500, &res), expected);
}

#[test]
fn substitution_on_man_changes_one_adjacent_key() {
    let res = Resources::default();
    let adj = adjacency(&res.layout);
    let word: Vec<char> = "من".chars().collect();
    for seed in 0..500 {
        let out: Vec<char> = run(ErrorTag::Substitution, "من", seed, &res)
            .changed()
            .unwrap()
            .chars()
            .collect();
        let diffs: Vec<usize> = (0..2).filter(|&i| out[i] != word[i]).collect();
        assert_eq!(diffs.len(), 1);
        assert!(adj[&word[diffs[0]]].contains(&out[diffs[0]]));
    }
}

#[test]
fn repetition_collapses_back() {
    let res = Resources::default();
    for seed in 0..500 {
        let out = run(ErrorTag::Repetition, "داودی", seed, &res).changed().unwrap();
        let extra = out.chars().count() - 5;
        assert!(extra == 1 || extra == 2);
        let chars: Vec<char> = out.chars().collect();
        let restored = (0..chars.len()).any(|p| {
            let mut v = chars.clone();
            v.drain(p..p + extra);
            v.iter().collect::<String>() == "داودی" && chars[p..=p + extra].iter().all(|&c| c == chars[p])
        });
        assert!(restored, "{out}");
    }
}

#[test]
fn spacing_variants_invert_at_a_pinned_site() {
    let res = Resources::default();
    let with_zwnj = "بی\u{200c}حوصله";
    for seed in 0..50 {
        let white = run(ErrorTag::SpacePseudoToWhite, with_zwnj, seed, &res).changed().unwrap();
        let back = run(ErrorTag::SpaceWhiteToPseudo, &white, seed, &res).changed().unwrap();
        assert_eq!(back, with_zwnj);
    }
    for seed in 0..50 {
        let split = run(ErrorTag::SpaceEmptyToPseudo, "کتاب", seed, &res).changed().unwrap();
        assert_eq!(split.chars().filter(|&c| c == ZWNJ).count(), 1);
        let joined = run(ErrorTag::SpacePseudoToEmpty, &split, seed, &res).changed().unwrap();
        assert_eq!(joined, "کتاب");
    }
}

#[test]
fn same_seed_same_output() {
    let res = Resources::default();
    for tag in ErrorTag::ALL {
        for seed in 0..20 {
            assert_eq!(run(tag, "قانونگذار", seed, &res), run(tag, "قانونگذار", seed, &res));
        }
    }
}

fn persian_word() -> impl Strategy<Value = String> {
    let alphabet: Vec<char> = "ابپتثجچحخدذرزژسشصضطظعغفقکگلمنوهیآئء؟،"
        .chars()
        .chain([ZWNJ, ' '])
        .collect();
    prop::collection::vec(prop::sample::select(alphabet), 1..9)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #[test]
    fn random_words_respect_oracles(word in persian_word(), seed in any::<u64>(), code in 0u8..16) {
        let res = Resources::default();
        let tag = ErrorTag::from_code(code).unwrap();
        let legal = legal_outputs(tag, &word, &res);
        match tag.apply(&word, &mut RngStream::new(seed), &res) {
            ApplyOutcome::NotApplicable => prop_assert!(legal.is_empty()),
            ApplyOutcome::Changed(out) => {
                prop_assert_ne!(&out, &word);
                prop_assert!(legal.contains(&out));
            }
        }
    }
}

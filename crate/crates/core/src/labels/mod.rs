//! Label alphabets and tokenizers.
//!
//! An [`Alphabet`] holds the label set L; the blank-augmented set L' used by
//! the CTC machinery is L plus a reserved blank at id 0, so label ids run
//! from 1 to |L|. Transcripts are turned into id sequences by one of three
//! tokenizers: per-character, lexicon phonemes, or learned BPE subwords.

mod bpe;
mod lexicon;

pub use bpe::{bpe_decode, bpe_encode, bpe_learn, load_bpe_model, save_bpe_model, BpeModel};
pub use lexicon::{detokenize_phonemes, load_lexicon, tokenize_phonemes, Lexicon};

use std::collections::HashMap;

use crate::error::LabelError;

/// Reserved id of the blank symbol in the augmented alphabet L'.
pub const BLANK_ID: usize = 0;

/// Display marker for the blank symbol; never a member of L.
pub const BLANK_MARKER: &str = "-";

/// Explicit word-boundary symbol used by the character tokenizer.
pub const SPACE_SYMBOL: &str = "\u{2423}"; // ␣

/// An ordered label set L. Augmented ids: 0 = blank, then 1..=|L| in symbol
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Result<Self, LabelError> {
        let mut index = HashMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() {
                return Err(LabelError::InvalidAlphabet {
                    what: format!("symbol {i} is empty"),
                });
            }
            if s == BLANK_MARKER {
                return Err(LabelError::InvalidAlphabet {
                    what: format!("symbol {i} equals the blank marker {BLANK_MARKER:?}"),
                });
            }
            if index.insert(s.clone(), i + 1).is_some() {
                return Err(LabelError::InvalidAlphabet {
                    what: format!("duplicate symbol {s:?}"),
                });
            }
        }
        Ok(Alphabet { symbols, index })
    }

    /// |L|, excluding blank.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    /// |L'| = |L| + 1.
    pub fn augmented_size(&self) -> usize {
        self.symbols.len() + 1
    }

    /// Augmented id of a symbol (1-based; 0 is reserved for blank).
    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Symbol for an augmented id >= 1.
    pub fn symbol(&self, id: usize) -> Option<&str> {
        if id == BLANK_ID {
            return None;
        }
        self.symbols.get(id - 1).map(|s| s.as_str())
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// The first `n` lowercase letters, for synthetic corpora. `n <= 26`.
    pub fn lowercase(n: usize) -> Alphabet {
        assert!(n <= 26, "lowercase alphabet supports at most 26 symbols");
        let symbols = (0..n)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect();
        Alphabet::new(symbols).expect("letters are distinct")
    }

    /// English character set: 26 letters, the word-boundary symbol, and the
    /// apostrophe. 28 symbols, so |L'| = 29.
    pub fn english_chars() -> Alphabet {
        let mut symbols: Vec<String> = (b'a'..=b'z').map(|c| (c as char).to_string()).collect();
        symbols.push(SPACE_SYMBOL.to_string());
        symbols.push("'".to_string());
        Alphabet::new(symbols).expect("fixed set is valid")
    }
}

/// The labeling regime, without its data. Detokenization needs only this
/// plus the alphabet, so decoded checkpoints can render hypotheses without
/// the original lexicon or merge list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerKind {
    Char,
    Bpe,
    Phoneme,
}

impl TokenizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            TokenizerKind::Char => "char",
            TokenizerKind::Bpe => "bpe",
            TokenizerKind::Phoneme => "phoneme",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "char" => Some(TokenizerKind::Char),
            "bpe" => Some(TokenizerKind::Bpe),
            "phoneme" => Some(TokenizerKind::Phoneme),
            _ => None,
        }
    }

    pub fn detokenize(&self, ids: &[usize], alphabet: &Alphabet) -> Result<String, LabelError> {
        match self {
            TokenizerKind::Char => detokenize_chars(ids, alphabet),
            TokenizerKind::Phoneme => {
                let mut parts = Vec::with_capacity(ids.len());
                for &id in ids {
                    parts.push(alphabet.symbol(id).ok_or(LabelError::UnknownId { id })?);
                }
                Ok(parts.join(" "))
            }
            TokenizerKind::Bpe => {
                let mut text = String::new();
                for &id in ids {
                    text.push_str(alphabet.symbol(id).ok_or(LabelError::UnknownId { id })?);
                }
                let words: Vec<&str> =
                    text.split(bpe::WORD_END).filter(|w| !w.is_empty()).collect();
                Ok(words.join(" "))
            }
        }
    }
}

/// One of the three labeling regimes, bundled with what it needs to map
/// text to ids and back.
#[derive(Debug, Clone)]
pub enum Tokenizer {
    Char(Alphabet),
    Bpe(BpeModel),
    Phoneme(Lexicon),
}

impl Tokenizer {
    pub fn kind(&self) -> TokenizerKind {
        match self {
            Tokenizer::Char(_) => TokenizerKind::Char,
            Tokenizer::Bpe(_) => TokenizerKind::Bpe,
            Tokenizer::Phoneme(_) => TokenizerKind::Phoneme,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        match self {
            Tokenizer::Char(a) => a,
            Tokenizer::Bpe(m) => &m.vocab,
            Tokenizer::Phoneme(l) => l.phoneme_alphabet(),
        }
    }

    pub fn tokenize(&self, transcript: &str) -> Result<Vec<usize>, LabelError> {
        match self {
            Tokenizer::Char(a) => tokenize_chars(transcript, a),
            Tokenizer::Bpe(m) => bpe_encode(transcript, m),
            Tokenizer::Phoneme(l) => tokenize_phonemes(transcript, l),
        }
    }

    pub fn detokenize(&self, ids: &[usize]) -> Result<String, LabelError> {
        self.kind().detokenize(ids, self.alphabet())
    }
}

/// Builds a character alphabet from a corpus: the distinct characters of all
/// transcripts, sorted, with spaces mapped to the word-boundary symbol.
pub fn char_alphabet_from_corpus<'a>(
    transcripts: impl IntoIterator<Item = &'a str>,
) -> Result<Alphabet, LabelError> {
    let mut set = std::collections::BTreeSet::new();
    for t in transcripts {
        for ch in t.chars() {
            if ch == ' ' {
                set.insert(SPACE_SYMBOL.to_string());
            } else {
                set.insert(ch.to_string());
            }
        }
    }
    Alphabet::new(set.into_iter().collect())
}

/// One id per character; spaces map to the explicit word-boundary symbol.
pub fn tokenize_chars(transcript: &str, alphabet: &Alphabet) -> Result<Vec<usize>, LabelError> {
    let mut ids = Vec::new();
    for (pos, ch) in transcript.chars().enumerate() {
        let key: String = if ch == ' ' {
            SPACE_SYMBOL.to_string()
        } else {
            ch.to_string()
        };
        match alphabet.id(&key) {
            Some(id) => ids.push(id),
            None => {
                return Err(LabelError::UnknownChar {
                    ch: key,
                    pos,
                })
            }
        }
    }
    Ok(ids)
}

/// Inverse of [`tokenize_chars`] on its valid domain.
pub fn detokenize_chars(ids: &[usize], alphabet: &Alphabet) -> Result<String, LabelError> {
    let mut out = String::new();
    for &id in ids {
        let sym = alphabet
            .symbol(id)
            .ok_or(LabelError::UnknownId { id })?;
        if sym == SPACE_SYMBOL {
            out.push(' ');
        } else {
            out.push_str(sym);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_ids_are_one_based() {
        let a = Alphabet::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(a.size(), 2);
        assert_eq!(a.augmented_size(), 3);
        assert_eq!(a.id("a"), Some(1));
        assert_eq!(a.id("b"), Some(2));
        assert_eq!(a.symbol(0), None);
        assert_eq!(a.symbol(2), Some("b"));
    }

    #[test]
    fn alphabet_rejects_blank_and_duplicates() {
        assert!(Alphabet::new(vec!["-".into()]).is_err());
        assert!(Alphabet::new(vec!["a".into(), "a".into()]).is_err());
        assert!(Alphabet::new(vec!["".into()]).is_err());
    }

    #[test]
    fn char_tokenize_with_space_symbol() {
        let a = Alphabet::new(vec!["a".into(), "b".into(), SPACE_SYMBOL.into()]).unwrap();
        let ids = tokenize_chars("ab a", &a).unwrap();
        assert_eq!(ids, vec![1, 2, 3, 1]);
        assert_eq!(detokenize_chars(&ids, &a).unwrap(), "ab a");
    }

    #[test]
    fn char_tokenize_empty() {
        let a = Alphabet::lowercase(3);
        assert!(tokenize_chars("", &a).unwrap().is_empty());
    }

    #[test]
    fn char_tokenize_unknown_names_position() {
        let a = Alphabet::lowercase(2);
        let err = tokenize_chars("az", &a).unwrap_err();
        match err {
            LabelError::UnknownChar { ch, pos } => {
                assert_eq!(ch, "z");
                assert_eq!(pos, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn english_chars_has_28_symbols() {
        let a = Alphabet::english_chars();
        assert_eq!(a.size(), 28);
        assert_eq!(a.augmented_size(), 29);
    }

    #[test]
    fn corpus_alphabet_is_sorted_and_deduped() {
        let a = char_alphabet_from_corpus(["ba c", "ab"]).unwrap();
        assert_eq!(
            a.symbols(),
            &["a".to_string(), "b".to_string(), "c".to_string(), SPACE_SYMBOL.to_string()]
        );
    }
}

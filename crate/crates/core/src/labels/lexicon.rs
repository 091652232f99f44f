//! Pronunciation lexicon: word -> phoneme sequence, with the phoneme
//! alphabet derived from the entries.
//!
//! File format: one entry per line, `WORD<TAB>PH1 PH2 ...`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::Alphabet;
use crate::error::LabelError;

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
    phonemes: Alphabet,
}

impl Lexicon {
    /// Builds a lexicon; the phoneme alphabet is the sorted set of phonemes
    /// appearing in any entry.
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self, LabelError> {
        let mut set = std::collections::BTreeSet::new();
        for (word, phones) in &entries {
            if phones.is_empty() {
                return Err(LabelError::InvalidAlphabet {
                    what: format!("word {word:?} has an empty pronunciation"),
                });
            }
            for p in phones {
                set.insert(p.clone());
            }
        }
        let phonemes = Alphabet::new(set.into_iter().collect())?;
        Ok(Lexicon { entries, phonemes })
    }

    pub fn phoneme_alphabet(&self) -> &Alphabet {
        &self.phonemes
    }

    pub fn pronunciation(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, LabelError> {
    let text = fs::read_to_string(path).map_err(|e| LabelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut entries = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, phones) = line.split_once('\t').ok_or_else(|| LabelError::Parse {
            path: path.display().to_string(),
            line: lineno,
            what: "expected `WORD<TAB>PH1 PH2 ...`".into(),
        })?;
        let phones: Vec<String> = phones.split_whitespace().map(str::to_string).collect();
        if phones.is_empty() {
            return Err(LabelError::Parse {
                path: path.display().to_string(),
                line: lineno,
                what: format!("word {word:?} has no phonemes"),
            });
        }
        entries.insert(word.to_string(), phones);
    }
    Lexicon::new(entries)
}

/// Concatenation of per-word phoneme id sequences, in word order.
pub fn tokenize_phonemes(transcript: &str, lexicon: &Lexicon) -> Result<Vec<usize>, LabelError> {
    let mut ids = Vec::new();
    for word in transcript.split_whitespace() {
        let phones = lexicon
            .pronunciation(word)
            .ok_or_else(|| LabelError::UnknownWord {
                word: word.to_string(),
            })?;
        for p in phones {
            ids.push(
                lexicon
                    .phonemes
                    .id(p)
                    .expect("lexicon phonemes are members of the phoneme alphabet"),
            );
        }
    }
    Ok(ids)
}

/// Phoneme symbols joined by spaces.
pub fn detokenize_phonemes(ids: &[usize], lexicon: &Lexicon) -> Result<String, LabelError> {
    let mut parts = Vec::with_capacity(ids.len());
    for &id in ids {
        parts.push(
            lexicon
                .phonemes
                .symbol(id)
                .ok_or(LabelError::UnknownId { id })?,
        );
    }
    Ok(parts.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Lexicon {
        let mut m = BTreeMap::new();
        m.insert("cat".to_string(), vec!["K".into(), "AE".into(), "T".into()]);
        m.insert("at".to_string(), vec!["AE".into(), "T".into()]);
        Lexicon::new(m).unwrap()
    }

    #[test]
    fn single_word() {
        let lex = toy();
        let ids = tokenize_phonemes("cat", &lex).unwrap();
        let names: Vec<&str> = ids.iter().map(|&i| lex.phonemes.symbol(i).unwrap()).collect();
        assert_eq!(names, vec!["K", "AE", "T"]);
    }

    #[test]
    fn repeated_word_concatenates() {
        let lex = toy();
        let ids = tokenize_phonemes("cat cat", &lex).unwrap();
        assert_eq!(ids.len(), 6);
        assert_eq!(&ids[0..3], &ids[3..6]);
    }

    #[test]
    fn oov_word_is_reported() {
        let lex = toy();
        match tokenize_phonemes("dog", &lex) {
            Err(LabelError::UnknownWord { word }) => assert_eq!(word, "dog"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.txt");
        std::fs::write(&path, "cat\tK AE T\nat\tAE T\n").unwrap();
        let lex = load_lexicon(&path).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.phoneme_alphabet().size(), 3);
    }
}

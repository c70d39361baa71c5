//! Token filtering shared by flows, the co-occurrence graph and subtrees.

use std::collections::HashSet;
use std::io::BufRead;

use crate::conllu::Token;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Decides which tokens carry flow and appear in costs.
///
/// Filtered tokens stay in the tree (hop distances and subtree traversal
/// still pass through them); they just never become graph nodes, flow
/// carriers or subtree members.
#[derive(Clone, Debug)]
pub struct TokenFilter {
    pub lowercase: bool,
    pub drop_punct: bool,
    pub stopwords: HashSet<String>,
}

impl Default for TokenFilter {
    fn default() -> Self {
        TokenFilter {
            lowercase: true,
            drop_punct: true,
            stopwords: parse_stopwords(DEFAULT_STOPWORDS.as_bytes()),
        }
    }
}

impl TokenFilter {
    /// Keeps everything except the empty string.
    pub fn none() -> Self {
        TokenFilter {
            lowercase: true,
            drop_punct: false,
            stopwords: HashSet::new(),
        }
    }

    pub fn with_stopwords<R: BufRead>(mut self, reader: R) -> Self {
        self.stopwords = parse_stopwords(reader);
        self
    }

    pub fn keeps(&self, token: &Token) -> bool {
        if token.surface.is_empty() || (self.drop_punct && token.upos == "PUNCT") {
            return false;
        }
        let key = token.key(self.lowercase);
        !self.stopwords.contains(key.as_ref())
    }

    /// Stopwords in sorted order, for manifests and cache keys.
    pub fn sorted_stopwords(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.stopwords.iter().map(String::as_str).collect();
        words.sort_unstable();
        words
    }
}

/// One word per line; blank lines and `#` comments are ignored. Words are
/// lowercased.
pub fn parse_stopwords<R: BufRead>(reader: R) -> HashSet<String> {
    reader
        .lines()
        .map_while(Result::ok)
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_filter() {
        let f = TokenFilter::default();
        assert!(!f.keeps(&Token::new(1, "The", "DET", 0, "det")));
        assert!(!f.keeps(&Token::new(1, ".", "PUNCT", 0, "punct")));
        assert!(f.keeps(&Token::new(1, "you", "PRON", 0, "nsubj")));
        assert!(f.keeps(&Token::new(1, "bank", "NOUN", 0, "root")));
    }

    #[test]
    fn custom_list() {
        let f = TokenFilter::none().with_stopwords("# comment\nBank\n\n".as_bytes());
        assert_eq!(f.sorted_stopwords(), vec!["bank"]);
        assert!(!f.keeps(&Token::new(1, "bank", "NOUN", 0, "root")));
        assert!(f.keeps(&Token::new(1, ",", "PUNCT", 0, "punct")));
    }
}

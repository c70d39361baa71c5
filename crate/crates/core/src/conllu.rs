//! CoNLL-U reading and writing, plus the tree queries used by the
//! co-occurrence graph and subtree extraction.
//!
//! Only basic dependency trees are kept: multiword-token ranges (`3-4`) and
//! empty nodes (`5.1`) are skipped, and the DEPS column is ignored.

use std::borrow::Cow;
use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("sentence {sentence_id}: dependency heads contain a cycle")]
    CyclicTree { sentence_id: String },

    #[error("sentence {sentence_id}: {count} tokens attach to the root")]
    MultipleRoots { sentence_id: String, count: usize },

    #[error("sentence {sentence_id}: token {token} has head {head}, which does not exist")]
    DanglingHead {
        sentence_id: String,
        token: usize,
        head: usize,
    },

    #[error("sentence {sentence_id}: token index {index} out of range 1..={len}")]
    IndexOutOfRange {
        sentence_id: String,
        index: usize,
        len: usize,
    },

    #[error("duplicate sentence id {0}")]
    DuplicateSentenceId(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One word of a dependency tree. `head` is 0 for the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(
        index: usize,
        surface: impl Into<String>,
        upos: impl Into<String>,
        head: usize,
        deprel: impl Into<String>,
    ) -> Self {
        let surface = surface.into();
        Token {
            index,
            lemma: surface.clone(),
            surface,
            upos: upos.into(),
            head,
            deprel: deprel.into(),
        }
    }

    /// Lookup key for vocabularies and the co-occurrence graph.
    pub fn key(&self, lowercase: bool) -> Cow<'_, str> {
        if lowercase && self.surface.chars().any(char::is_uppercase) {
            Cow::Owned(self.surface.to_lowercase())
        } else {
            Cow::Borrowed(&self.surface)
        }
    }
}

/// A validated dependency tree: single root, no dangling heads, no cycles.
#[derive(Clone, Debug)]
pub struct DepSentence {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
    pub raw_text: Option<String>,
    // children[i] lists dependents of token i (index 0 is the virtual root).
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

impl PartialEq for DepSentence {
    fn eq(&self, other: &Self) -> bool {
        self.sentence_id == other.sentence_id
            && self.tokens == other.tokens
            && self.raw_text == other.raw_text
    }
}

impl DepSentence {
    /// Validates the tree. Tokens must be numbered `1..=len` in order.
    pub fn new(
        sentence_id: impl Into<String>,
        tokens: Vec<Token>,
        raw_text: Option<String>,
    ) -> Result<Self, ConlluError> {
        let sentence_id = sentence_id.into();
        let n = tokens.len();
        for (pos, tok) in tokens.iter().enumerate() {
            if tok.index != pos + 1 {
                return Err(ConlluError::IndexOutOfRange {
                    sentence_id,
                    index: tok.index,
                    len: n,
                });
            }
            if tok.head > n {
                return Err(ConlluError::DanglingHead {
                    sentence_id,
                    token: tok.index,
                    head: tok.head,
                });
            }
        }

        let roots: Vec<usize> = tokens.iter().filter(|t| t.head == 0).map(|t| t.index).collect();
        if roots.len() > 1 {
            return Err(ConlluError::MultipleRoots {
                sentence_id,
                count: roots.len(),
            });
        }

        let mut children = vec![Vec::new(); n + 1];
        for tok in &tokens {
            children[tok.head].push(tok.index);
        }

        // Every token must be reachable from the virtual root; anything else
        // sits on (or hangs off) a cycle. Self-loops land here too.
        let mut depth = vec![usize::MAX; n + 1];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut seen = 0;
        while let Some(node) = queue.pop_front() {
            for &child in &children[node] {
                depth[child] = depth[node] + 1;
                seen += 1;
                queue.push_back(child);
            }
        }
        if roots.is_empty() || seen != n {
            return Err(ConlluError::CyclicTree { sentence_id });
        }

        Ok(DepSentence {
            sentence_id,
            root: roots[0],
            tokens,
            raw_text,
            children,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of the token attached to the virtual root.
    pub fn root(&self) -> usize {
        self.root
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Result<&Token, ConlluError> {
        self.check(index)?;
        Ok(&self.tokens[index - 1])
    }

    /// Direct dependents of `index`, in surface order.
    pub fn children(&self, index: usize) -> Result<&[usize], ConlluError> {
        self.check(index)?;
        Ok(&self.children[index])
    }

    fn check(&self, index: usize) -> Result<(), ConlluError> {
        if index == 0 || index > self.tokens.len() {
            Err(ConlluError::IndexOutOfRange {
                sentence_id: self.sentence_id.clone(),
                index,
                len: self.tokens.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Number of edges on the undirected tree path between `i` and `j`.
    pub fn hop_distance(&self, i: usize, j: usize) -> Result<usize, ConlluError> {
        self.check(i)?;
        self.check(j)?;
        let (mut a, mut b) = (i, j);
        let mut hops = 0;
        while self.depth[a] > self.depth[b] {
            a = self.tokens[a - 1].head;
            hops += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.tokens[b - 1].head;
            hops += 1;
        }
        while a != b {
            a = self.tokens[a - 1].head;
            b = self.tokens[b - 1].head;
            hops += 2;
        }
        Ok(hops)
    }

    /// Hop distances from `source` to every token (`out[k - 1]` for token `k`).
    pub fn hop_distances_from(&self, source: usize) -> Result<Vec<usize>, ConlluError> {
        self.check(source)?;
        let n = self.len();
        let mut dist = vec![usize::MAX; n];
        dist[source - 1] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(node) = queue.pop_front() {
            let d = dist[node - 1];
            let head = self.tokens[node - 1].head;
            let neighbours = self.children[node]
                .iter()
                .copied()
                .chain((head != 0).then_some(head));
            for next in neighbours {
                if dist[next - 1] == usize::MAX {
                    dist[next - 1] = d + 1;
                    queue.push_back(next);
                }
            }
        }
        Ok(dist)
    }

    /// Descendants of `parent` reachable within `hops` child edges, excluding
    /// `parent` itself. Returned in ascending token order.
    pub fn children_within(&self, parent: usize, hops: usize) -> Result<Vec<usize>, ConlluError> {
        self.check(parent)?;
        let mut out = Vec::new();
        let mut frontier = vec![parent];
        for _ in 0..hops {
            let next: Vec<usize> = frontier
                .iter()
                .flat_map(|&node| self.children[node].iter().copied())
                .collect();
            if next.is_empty() {
                break;
            }
            out.extend_from_slice(&next);
            frontier = next;
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// All sentences of one CoNLL-U source.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub sentences: Vec<DepSentence>,
    pub source_path: String,
}

impl Corpus {
    pub fn new(sentences: Vec<DepSentence>, source_path: impl Into<String>) -> Result<Self, ConlluError> {
        let mut seen = HashSet::new();
        for s in &sentences {
            if !seen.insert(s.sentence_id.as_str()) {
                return Err(ConlluError::DuplicateSentenceId(s.sentence_id.clone()));
            }
        }
        Ok(Corpus {
            sentences,
            source_path: source_path.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Position of a sentence by id. Linear scan; callers that need many
    /// lookups should build their own index.
    pub fn position(&self, sentence_id: &str) -> Option<usize> {
        self.sentences.iter().position(|s| s.sentence_id == sentence_id)
    }
}

enum LineId {
    Word(usize),
    Skipped,
}

fn parse_id(field: &str, line: usize) -> Result<LineId, ConlluError> {
    if field.contains('-') || field.contains('.') {
        return Ok(LineId::Skipped);
    }
    field
        .parse::<usize>()
        .ok()
        .filter(|&id| id >= 1)
        .map(LineId::Word)
        .ok_or_else(|| ConlluError::MalformedLine {
            line,
            reason: format!("invalid token id {field:?}"),
        })
}

#[derive(Default)]
struct Block {
    id: Option<String>,
    text: Option<String>,
    tokens: Vec<Token>,
    first_line: usize,
}

/// Reads a CoNLL-U stream into a validated corpus. Sentences without a
/// `# sent_id` comment are named `s1`, `s2`, ... by block position.
pub fn parse_conllu<R: BufRead>(reader: R, source_path: &str) -> Result<Corpus, ConlluError> {
    let mut sentences = Vec::new();
    let mut block = Block::default();

    let finish = |block: &mut Block, sentences: &mut Vec<DepSentence>| -> Result<(), ConlluError> {
        let b = std::mem::take(block);
        if b.tokens.is_empty() {
            if b.id.is_some() || b.text.is_some() {
                return Err(ConlluError::MalformedLine {
                    line: b.first_line,
                    reason: "sentence block without tokens".into(),
                });
            }
            return Ok(());
        }
        let id = b.id.unwrap_or_else(|| format!("s{}", sentences.len() + 1));
        sentences.push(DepSentence::new(id, b.tokens, b.text)?);
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            finish(&mut block, &mut sentences)?;
            continue;
        }
        if block.first_line == 0 {
            block.first_line = lineno;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => block.id = Some(value.trim().to_owned()),
                    "text" => block.text = Some(value.trim().to_owned()),
                    _ => {}
                }
            }
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(ConlluError::MalformedLine {
                line: lineno,
                reason: format!("expected 10 tab-separated columns, found {}", fields.len()),
            });
        }
        let index = match parse_id(fields[0], lineno)? {
            LineId::Word(id) => id,
            LineId::Skipped => continue,
        };
        if index != block.tokens.len() + 1 {
            return Err(ConlluError::MalformedLine {
                line: lineno,
                reason: format!("token id {index} out of sequence"),
            });
        }
        let head = fields[6].parse::<usize>().map_err(|_| ConlluError::MalformedLine {
            line: lineno,
            reason: format!("invalid head {:?}", fields[6]),
        })?;
        block.tokens.push(Token {
            index,
            surface: fields[1].to_owned(),
            lemma: fields[2].to_owned(),
            upos: fields[3].to_owned(),
            head,
            deprel: fields[7].to_owned(),
        });
    }
    finish(&mut block, &mut sentences)?;

    Corpus::new(sentences, source_path)
}

/// Writes sentences back as CoNLL-U. XPOS, FEATS, DEPS and MISC are not
/// retained and come out as `_`.
pub fn write_conllu<W: Write>(corpus: &Corpus, mut out: W) -> io::Result<()> {
    for sentence in &corpus.sentences {
        write!(out, "{}", ConlluSentence(sentence))?;
    }
    Ok(())
}

struct ConlluSentence<'a>(&'a DepSentence);

impl fmt::Display for ConlluSentence<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        writeln!(f, "# sent_id = {}", s.sentence_id)?;
        if let Some(text) = &s.raw_text {
            writeln!(f, "# text = {text}")?;
        }
        for t in &s.tokens {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index, t.surface, t.lemma, t.upos, t.head, t.deprel
            )?;
        }
        writeln!(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: usize, form: &str, upos: &str, head: usize, rel: &str) -> String {
        format!("{id}\t{form}\t{form}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_\n")
    }

    fn parse(text: &str) -> Result<Corpus, ConlluError> {
        parse_conllu(text.as_bytes(), "test")
    }

    fn chain() -> DepSentence {
        // a <- b <- c: c is root, governs b, b governs a.
        DepSentence::new(
            "chain",
            vec![
                Token::new(1, "a", "NOUN", 2, "dep"),
                Token::new(2, "b", "NOUN", 3, "dep"),
                Token::new(3, "c", "VERB", 0, "root"),
            ],
            None,
        )
        .unwrap()
    }

    /// "He found a skinny and fragile dog in his backyard ." with a UD-style
    /// analysis: dog is the object of found, skinny/fragile modify dog.
    pub(crate) fn found_sentence() -> DepSentence {
        let rows = [
            ("He", "PRON", 2, "nsubj"),
            ("found", "VERB", 0, "root"),
            ("a", "DET", 7, "det"),
            ("skinny", "ADJ", 7, "amod"),
            ("and", "CCONJ", 6, "cc"),
            ("fragile", "ADJ", 4, "conj"),
            ("dog", "NOUN", 2, "obj"),
            ("in", "ADP", 10, "case"),
            ("his", "PRON", 10, "nmod:poss"),
            ("backyard", "NOUN", 2, "obl"),
            (".", "PUNCT", 2, "punct"),
        ];
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, &(w, p, h, r))| Token::new(i + 1, w, p, h, r))
            .collect();
        DepSentence::new("found", tokens, None).unwrap()
    }

    #[test]
    fn smallest_valid_tree() {
        let text = [line(1, "a", "X", 2, "dep"), line(2, "b", "X", 0, "root"), line(3, "c", "X", 2, "dep")].concat();
        let corpus = parse(&text).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.sentences[0].root(), 2);
        assert_eq!(corpus.sentences[0].sentence_id, "s1");
    }

    #[test]
    fn cycles_are_rejected() {
        let two_cycle = [line(1, "a", "X", 2, "dep"), line(2, "b", "X", 1, "dep"), line(3, "c", "X", 0, "root")].concat();
        assert!(matches!(parse(&two_cycle), Err(ConlluError::CyclicTree { .. })));

        let self_loop = [line(1, "a", "X", 2, "dep"), line(2, "b", "X", 1, "dep"), line(3, "c", "X", 3, "dep")].concat();
        assert!(matches!(parse(&self_loop), Err(ConlluError::CyclicTree { .. })));
    }

    #[test]
    fn multiple_roots_and_dangling_heads() {
        let two_roots = [line(1, "a", "X", 0, "root"), line(2, "b", "X", 0, "root")].concat();
        assert!(matches!(parse(&two_roots), Err(ConlluError::MultipleRoots { count: 2, .. })));

        let dangling = [line(1, "a", "X", 7, "dep"), line(2, "b", "X", 0, "root")].concat();
        assert!(matches!(parse(&dangling), Err(ConlluError::DanglingHead { head: 7, .. })));
    }

    #[test]
    fn blank_lines_separate_sentences() {
        let text = format!(
            "# sent_id = one\n{}\n\n# sent_id = two\n{}{}\n",
            line(1, "a", "X", 0, "root").trim_end(),
            line(1, "b", "X", 0, "root"),
            line(2, "c", "X", 1, "dep")
        );
        let corpus = parse(&text).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.sentences[0].sentence_id, "one");
        assert_eq!(corpus.sentences[1].sentence_id, "two");
        assert_eq!(corpus.sentences[1].len(), 2);
    }

    #[test]
    fn multiword_and_empty_nodes_are_skipped() {
        let text = [
            line(1, "a", "X", 0, "root"),
            "2-3\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n".to_string(),
            line(2, "de", "ADP", 3, "case"),
            line(3, "el", "DET", 1, "det"),
            "3.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n".to_string(),
        ]
        .concat();
        let corpus = parse(&text).unwrap();
        assert_eq!(corpus.sentences[0].len(), 3);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse("1\ta\tb\n"), Err(ConlluError::MalformedLine { line: 1, .. })));
        let bad_head = "1\ta\ta\tX\t_\t_\tzero\troot\t_\t_\n";
        assert!(matches!(parse(bad_head), Err(ConlluError::MalformedLine { .. })));
        let bad_id = "x\ta\ta\tX\t_\t_\t0\troot\t_\t_\n";
        assert!(matches!(parse(bad_id), Err(ConlluError::MalformedLine { .. })));
    }

    #[test]
    fn duplicate_ids() {
        let text = format!(
            "# sent_id = x\n{}\n# sent_id = x\n{}",
            line(1, "a", "X", 0, "root"),
            line(1, "b", "X", 0, "root")
        );
        assert!(matches!(parse(&text), Err(ConlluError::DuplicateSentenceId(_))));
    }

    #[test]
    fn hop_distances() {
        let s = chain();
        assert_eq!(s.hop_distance(2, 2).unwrap(), 0);
        assert_eq!(s.hop_distance(1, 3).unwrap(), 2);
        assert_eq!(s.hop_distance(3, 1).unwrap(), 2);
        assert!(matches!(s.hop_distance(0, 1), Err(ConlluError::IndexOutOfRange { .. })));
        assert!(matches!(s.hop_distance(1, 4), Err(ConlluError::IndexOutOfRange { .. })));

        let found = found_sentence();
        // skinny -> dog -> found
        assert_eq!(found.hop_distance(4, 2).unwrap(), 2);
        assert_eq!(found.hop_distance(7, 2).unwrap(), 1);
        // fragile hangs off skinny via the conj relation
        assert_eq!(found.hop_distance(6, 2).unwrap(), 3);
        for i in 1..=found.len() {
            let bfs = found.hop_distances_from(i).unwrap();
            for j in 1..=found.len() {
                assert_eq!(bfs[j - 1], found.hop_distance(i, j).unwrap());
            }
        }
    }

    #[test]
    fn descendants_within_hops() {
        let s = chain();
        assert!(s.children_within(1, 1).unwrap().is_empty());
        assert_eq!(s.children_within(3, 2).unwrap(), vec![1, 2]);
        assert_eq!(s.children_within(3, 1).unwrap(), vec![2]);
        assert!(s.children_within(9, 1).is_err());
    }

    #[test]
    fn lowercase_key() {
        let t = Token::new(1, "Bank", "NOUN", 0, "root");
        assert_eq!(t.key(true), "bank");
        assert_eq!(t.key(false), "Bank");
    }
}

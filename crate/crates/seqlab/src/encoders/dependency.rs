//! Dependency trees, the CoNLL-style reader, major/surrounding sentence
//! segmentation, and structural block extraction.
//!
//! Token positions and head indices are 1-based throughout, with head 0
//! meaning the root, matching the tab-separated input format:
//! `index<TAB>form<TAB>pos<TAB>head_index<TAB>deprel`, one token per line,
//! blank line between sentences.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Core-argument relations that form the major segment by default.
pub const DEFAULT_CORE_ROLES: [&str; 5] = ["nsubj", "obj", "iobj", "ccomp", "xcomp"];

/// One parsed sentence: surface forms, 1-based head indices (0 = root),
/// dependency relations, and part-of-speech tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    tokens: Vec<String>,
    heads: Vec<usize>,
    deprels: Vec<String>,
    pos: Vec<String>,
}

impl DependencyTree {
    /// Validates the tree: one root, in-range heads, no cycles.
    pub fn new(
        tokens: Vec<String>,
        heads: Vec<usize>,
        deprels: Vec<String>,
        pos: Vec<String>,
    ) -> Result<DependencyTree> {
        let n = tokens.len();
        if n == 0 {
            return Err(Error::Tree("empty sentence".to_string()));
        }
        if heads.len() != n || deprels.len() != n || pos.len() != n {
            return Err(Error::Tree(format!(
                "field lengths disagree: {} tokens, {} heads, {} deprels, {} pos",
                n,
                heads.len(),
                deprels.len(),
                pos.len()
            )));
        }
        let roots = heads.iter().filter(|&&h| h == 0).count();
        if roots != 1 {
            return Err(Error::Tree(format!("expected exactly one root, found {roots}")));
        }
        if let Some(&bad) = heads.iter().find(|&&h| h > n) {
            return Err(Error::Tree(format!("head index {bad} out of range for {n} tokens")));
        }
        for start in 1..=n {
            let mut cur = start;
            let mut steps = 0;
            while heads[cur - 1] != 0 {
                cur = heads[cur - 1];
                steps += 1;
                if steps > n {
                    return Err(Error::Tree(format!("cycle reachable from token {start}")));
                }
            }
        }
        Ok(DependencyTree { tokens, heads, deprels, pos })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn deprels(&self) -> &[String] {
        &self.deprels
    }

    pub fn pos(&self) -> &[String] {
        &self.pos
    }

    /// 1-based index of the root token.
    pub fn root(&self) -> usize {
        self.heads.iter().position(|&h| h == 0).expect("validated") + 1
    }
}

/// Parse CoNLL-style text into trees. Line numbers in errors are 1-based
/// over the whole input.
pub fn parse_conll(text: &str) -> Result<Vec<DependencyTree>> {
    let mut trees = Vec::new();
    let mut tokens = Vec::new();
    let mut heads = Vec::new();
    let mut deprels = Vec::new();
    let mut pos = Vec::new();
    let mut first_line = 0usize;

    let flush = |tokens: &mut Vec<String>,
                     heads: &mut Vec<usize>,
                     deprels: &mut Vec<String>,
                     pos: &mut Vec<String>,
                     line: usize|
     -> Result<Option<DependencyTree>> {
        if tokens.is_empty() {
            return Ok(None);
        }
        DependencyTree::new(
            std::mem::take(tokens),
            std::mem::take(heads),
            std::mem::take(deprels),
            std::mem::take(pos),
        )
        .map(Some)
        .map_err(|e| Error::Format { line, detail: e.to_string() })
    };

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if let Some(tree) = flush(&mut tokens, &mut heads, &mut deprels, &mut pos, first_line)?
            {
                trees.push(tree);
            }
            continue;
        }
        if tokens.is_empty() {
            first_line = lineno;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Format {
                line: lineno,
                detail: format!("expected 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let index: usize = fields[0].parse().map_err(|_| Error::Format {
            line: lineno,
            detail: format!("bad token index '{}'", fields[0]),
        })?;
        if index != tokens.len() + 1 {
            return Err(Error::Format {
                line: lineno,
                detail: format!("token index {index} out of order (expected {})", tokens.len() + 1),
            });
        }
        let head: usize = fields[3].parse().map_err(|_| Error::Format {
            line: lineno,
            detail: format!("bad head index '{}'", fields[3]),
        })?;
        tokens.push(fields[1].to_string());
        pos.push(fields[2].to_string());
        heads.push(head);
        deprels.push(fields[4].to_string());
    }
    if let Some(tree) = flush(&mut tokens, &mut heads, &mut deprels, &mut pos, first_line)? {
        trees.push(tree);
    }
    Ok(trees)
}

pub fn read_conll_file(path: &Path) -> Result<Vec<DependencyTree>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_conll(&text)
}

// ───────────────────────── segmentation ─────────────────────────

/// A partition of a sentence into the core-argument (major) tokens and the
/// rest, both in sentence order. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsSegmentation {
    pub major: Vec<usize>,
    pub surrounding: Vec<usize>,
}

impl MsSegmentation {
    /// Check the partition laws against a sentence of length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.major.is_empty() {
            return Err(Error::Contract("major segment must not be empty".to_string()));
        }
        let mut seen = vec![false; n + 1];
        for &i in self.major.iter().chain(&self.surrounding) {
            if i == 0 || i > n {
                return Err(Error::Contract(format!(
                    "segment index {i} out of range for {n} tokens"
                )));
            }
            if seen[i] {
                return Err(Error::Contract(format!("segment index {i} repeated")));
            }
            seen[i] = true;
        }
        if seen[1..=n].iter().any(|&s| !s) {
            return Err(Error::Contract(format!(
                "segments do not cover all {n} tokens"
            )));
        }
        Ok(())
    }
}

/// Split a sentence into the major segment (root plus tokens whose relation
/// is in `core_roles`) and the surrounding segment (everything else).
pub fn segment_sentence(tree: &DependencyTree, core_roles: &[&str]) -> MsSegmentation {
    let root = tree.root();
    let mut major = Vec::new();
    let mut surrounding = Vec::new();
    for i in 1..=tree.len() {
        if i == root || core_roles.contains(&tree.deprels()[i - 1].as_str()) {
            major.push(i);
        } else {
            surrounding.push(i);
        }
    }
    MsSegmentation { major, surrounding }
}

// ───────────────────────── structural blocks ─────────────────────────

/// 1-based inclusive token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> {
        self.start..=self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Per-entity structural blocks: the entity tokens plus their dependency
/// parents, siblings, and children, in sentence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSet {
    pub e1_span: Span,
    pub e2_span: Span,
    pub e1_block: Vec<usize>,
    pub e2_block: Vec<usize>,
}

fn relatives(tree: &DependencyTree, span: &Span) -> Vec<usize> {
    let mut block = BTreeSet::new();
    for t in span.indices() {
        block.insert(t);
        let head = tree.heads()[t - 1];
        if head != 0 {
            block.insert(head); // parent
        }
        for j in 1..=tree.len() {
            if j == t {
                continue;
            }
            if tree.heads()[j - 1] == head && head != 0 {
                block.insert(j); // sibling
            }
            if tree.heads()[j - 1] == t {
                block.insert(j); // child
            }
        }
    }
    block.into_iter().collect()
}

/// Gather each entity's structural block from the dependency tree. Spans
/// must be non-empty, disjoint, and inside the sentence.
pub fn extract_blocks(tree: &DependencyTree, e1_span: Span, e2_span: Span) -> Result<BlockSet> {
    for span in [&e1_span, &e2_span] {
        if span.is_empty() || span.start == 0 {
            return Err(Error::Contract(format!("entity span {span:?} is empty or 0-based")));
        }
        if span.end > tree.len() {
            return Err(Error::Contract(format!(
                "entity span {span:?} exceeds sentence length {}",
                tree.len()
            )));
        }
    }
    if e1_span.overlaps(&e2_span) {
        return Err(Error::Contract(format!(
            "entity spans overlap: {e1_span:?} vs {e2_span:?}"
        )));
    }
    Ok(BlockSet {
        e1_span,
        e2_span,
        e1_block: relatives(tree, &e1_span),
        e2_block: relatives(tree, &e2_span),
    })
}

//! TOP-format semantic parses.
//!
//! A parse is a bracketed tree such as `[in:get_weather [sl:location sydney ] ]`.
//! Opening brackets are fused with their label into one whitespace token
//! (`[in:get_weather`), closing brackets are the standalone token `]`, and
//! every other token is a leaf copied from the utterance.
//!
//! Intent nodes hold tokens and slot nodes; slot nodes hold tokens and
//! (nested) intent nodes. Intents may be leafless, slots may not.

use std::fmt;
use std::ops::Deref;

use thiserror::Error;

const OPEN: char = '[';
const CLOSE: &str = "]";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopError {
    #[error("unbalanced brackets at token {position}: {detail}")]
    UnbalancedBrackets { position: usize, detail: &'static str },
    #[error("empty tree")]
    EmptyTree,
    #[error("root node must be an intent, found `{label}`")]
    RootNotIntent { label: String },
    #[error("bad label `{label}` at token {position}")]
    BadLabel { position: usize, label: String },
    #[error("{child} node `{label}` cannot appear directly under a {parent} node")]
    BadNesting {
        label: String,
        child: NodeKind,
        parent: NodeKind,
    },
    #[error("slot `{label}` has no tokens")]
    SlotWithoutTokens { label: String },
    #[error("invalid token `{0}`")]
    InvalidToken(String),
    #[error("parse leaves are not an ordered subsequence of the utterance (leaf {leaf_index} `{leaf}` unmatched)")]
    AlignmentFailed { leaf_index: usize, leaf: String },
}

/// Lowercases, collapses whitespace runs to one space, and trims.
pub fn canonicalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// A single whitespace-free word of an utterance or parse leaf.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self, TopError> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) || text.starts_with(OPEN) || text == CLOSE {
            return Err(TopError::InvalidToken(text));
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl Deref for Token {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl serde::Serialize for Token {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered token sequence. Construction from text canonicalizes first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Utterance(Vec<Token>);

impl Utterance {
    pub fn new(tokens: Vec<Token>) -> Self {
        Utterance(tokens)
    }

    pub fn parse(text: &str) -> Result<Self, TopError> {
        canonicalize(text)
            .split(' ')
            .filter(|w| !w.is_empty())
            .map(Token::new)
            .collect::<Result<Vec<_>, _>>()
            .map(Utterance)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.0
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tok) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(tok)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Intent,
    Slot,
}

impl NodeKind {
    fn prefix(self) -> &'static str {
        match self {
            NodeKind::Intent => "in",
            NodeKind::Slot => "sl",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Intent => "intent",
            NodeKind::Slot => "slot",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeLabel {
    kind: NodeKind,
    name: String,
}

impl NodeLabel {
    pub fn new(kind: NodeKind, name: impl Into<String>) -> Result<Self, TopError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(TopError::BadLabel {
                position: 0,
                label: format!("{}:{}", kind.prefix(), name),
            });
        }
        Ok(NodeLabel { kind, name })
    }

    pub fn intent(name: impl Into<String>) -> Result<Self, TopError> {
        Self::new(NodeKind::Intent, name)
    }

    pub fn slot(name: impl Into<String>) -> Result<Self, TopError> {
        Self::new(NodeKind::Slot, name)
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Parses an opening token such as `[in:get_weather` (already lowercased).
    fn from_open_token(token: &str, position: usize) -> Result<Self, TopError> {
        let bad = || TopError::BadLabel {
            position,
            label: token.to_string(),
        };
        let body = token.strip_prefix(OPEN).ok_or_else(bad)?;
        let (prefix, name) = body.split_once(':').ok_or_else(bad)?;
        let kind = match prefix {
            "in" => NodeKind::Intent,
            "sl" => NodeKind::Slot,
            _ => return Err(bad()),
        };
        if !valid_name(name) {
            return Err(bad());
        }
        Ok(NodeLabel {
            kind,
            name: name.to_string(),
        })
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}:{}", self.kind.prefix(), self.name)
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Child {
    Token(Token),
    Node(Node),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    label: NodeLabel,
    children: Vec<Child>,
}

impl Node {
    /// Builds a node, enforcing the nesting and non-empty-slot rules.
    pub fn new(label: NodeLabel, children: Vec<Child>) -> Result<Self, TopError> {
        for child in &children {
            if let Child::Node(n) = child {
                if n.label.kind == label.kind {
                    return Err(TopError::BadNesting {
                        label: n.label.name.clone(),
                        child: n.label.kind,
                        parent: label.kind,
                    });
                }
            }
        }
        let node = Node { label, children };
        if node.label.kind == NodeKind::Slot && node.leaf_count() == 0 {
            return Err(TopError::SlotWithoutTokens {
                label: node.label.name.clone(),
            });
        }
        Ok(node)
    }

    pub fn label(&self) -> &NodeLabel {
        &self.label
    }

    pub fn children(&self) -> &[Child] {
        &self.children
    }

    fn leaf_count(&self) -> usize {
        self.children
            .iter()
            .map(|c| match c {
                Child::Token(_) => 1,
                Child::Node(n) => n.leaf_count(),
            })
            .sum()
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Token>) {
        for child in &self.children {
            match child {
                Child::Token(t) => out.push(t),
                Child::Node(n) => n.collect_leaves(out),
            }
        }
    }

    fn write_tokens(&self, out: &mut String) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&self.label.to_string());
        for child in &self.children {
            match child {
                Child::Token(t) => {
                    out.push(' ');
                    out.push_str(t);
                }
                Child::Node(n) => n.write_tokens(out),
            }
        }
        out.push(' ');
        out.push_str(CLOSE);
    }

    fn map_leaves(&self, next: &mut usize, f: &mut impl FnMut(usize, &Token) -> Token) -> Node {
        let children = self
            .children
            .iter()
            .map(|c| match c {
                Child::Token(t) => {
                    let i = *next;
                    *next += 1;
                    Child::Token(f(i, t))
                }
                Child::Node(n) => Child::Node(n.map_leaves(next, f)),
            })
            .collect();
        Node {
            label: self.label.clone(),
            children,
        }
    }

    fn same_shape(&self, other: &Node) -> bool {
        self.label == other.label
            && self.children.len() == other.children.len()
            && self.children.iter().zip(&other.children).all(|pair| match pair {
                (Child::Token(_), Child::Token(_)) => true,
                (Child::Node(a), Child::Node(b)) => a.same_shape(b),
                _ => false,
            })
    }
}

/// A validated semantic parse whose root is an intent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParseTree {
    root: Node,
}

impl ParseTree {
    pub fn new(root: Node) -> Result<Self, TopError> {
        if root.label.kind != NodeKind::Intent {
            return Err(TopError::RootNotIntent {
                label: root.label.to_string(),
            });
        }
        Ok(ParseTree { root })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// In-order leaf tokens.
    pub fn leaves(&self) -> Vec<&Token> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// Returns a copy with every leaf passed through `f(leaf_index, token)`.
    pub fn map_leaves(&self, mut f: impl FnMut(usize, &Token) -> Token) -> ParseTree {
        let mut next = 0;
        ParseTree {
            root: self.root.map_leaves(&mut next, &mut f),
        }
    }

    /// True when both trees have identical topology and labels, ignoring leaf text.
    pub fn same_shape(&self, other: &ParseTree) -> bool {
        self.root.same_shape(&other.root)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        self.root.write_tokens(&mut out);
        out
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl std::str::FromStr for ParseTree {
    type Err = TopError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_top(s)
    }
}

/// Parses a TOP-format string. Input is canonicalized first.
pub fn parse_top(text: &str) -> Result<ParseTree, TopError> {
    let canonical = canonicalize(text);
    let tokens: Vec<&str> = canonical.split(' ').filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return Err(TopError::EmptyTree);
    }

    // Open nodes: (label, children so far).
    let mut stack: Vec<(NodeLabel, Vec<Child>)> = Vec::new();
    let mut root: Option<Node> = None;

    for (pos, &tok) in tokens.iter().enumerate() {
        if root.is_some() {
            return Err(TopError::UnbalancedBrackets {
                position: pos,
                detail: "tokens after the root node closed",
            });
        }
        if tok.starts_with(OPEN) {
            let label = NodeLabel::from_open_token(tok, pos)?;
            if stack.is_empty() && label.kind != NodeKind::Intent {
                return Err(TopError::RootNotIntent { label: tok.to_string() });
            }
            stack.push((label, Vec::new()));
        } else if tok == CLOSE {
            let (label, children) = stack.pop().ok_or(TopError::UnbalancedBrackets {
                position: pos,
                detail: "closing bracket without an open node",
            })?;
            let node = Node::new(label, children)?;
            match stack.last_mut() {
                Some((_, siblings)) => siblings.push(Child::Node(node)),
                None => root = Some(node),
            }
        } else {
            let (_, children) = stack.last_mut().ok_or(TopError::UnbalancedBrackets {
                position: pos,
                detail: "token outside of any bracket",
            })?;
            children.push(Child::Token(Token(tok.to_string())));
        }
    }

    match root {
        Some(node) => ParseTree::new(node),
        None => Err(TopError::UnbalancedBrackets {
            position: tokens.len(),
            detail: "missing closing bracket",
        }),
    }
}

pub fn serialize(tree: &ParseTree) -> String {
    tree.serialize()
}

/// Greedy left-to-right subsequence alignment of the tree's leaves onto the
/// utterance. Returns `(leaf_index, utterance_position)` pairs with strictly
/// increasing positions; the greedy match is the lexicographically smallest.
pub fn align_leaves(tree: &ParseTree, utt: &Utterance) -> Result<Vec<(usize, usize)>, TopError> {
    let words = utt.tokens();
    let mut cursor = 0;
    let mut out = Vec::new();
    for (leaf_index, leaf) in tree.leaves().into_iter().enumerate() {
        let found = words[cursor..]
            .iter()
            .position(|w| w == leaf)
            .ok_or_else(|| TopError::AlignmentFailed {
                leaf_index,
                leaf: leaf.to_string(),
            })?;
        out.push((leaf_index, cursor + found));
        cursor += found + 1;
    }
    Ok(out)
}

//! Bracketed pre-order serialization of RST trees.
//!
//! ```text
//! node  := "(" REL:<label> NUC:LEFT|NUC:RIGHT child child ")"
//! child := node | "<edu>" word+ "</edu>"
//! ```
//!
//! A whole sequence is a single `child`.

use std::fmt;

use thiserror::Error;

use super::*;

/// A linearized discourse structure. Serializes as one space-joined line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    pub fn from_line(line: &str) -> Self {
        TokenSequence(line.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl serde::Serialize for TokenSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for TokenSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let line = String::deserialize(d)?;
        Ok(TokenSequence::from_line(&line))
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnbalancedParen,
    EmptyEdu,
    BadArity,
    UnknownRelation,
    TrailingTokens,
    UnexpectedToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at token {position}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(position: usize, kind: ParseErrorKind) -> Self {
        ParseError { position, kind }
    }
}

pub fn linearize(tree: &RstTree) -> TokenSequence {
    let mut out = Vec::new();
    emit(tree, &mut out);
    TokenSequence(out)
}

fn emit(tree: &RstTree, out: &mut Vec<String>) {
    match tree {
        RstTree::Leaf(edu) => {
            out.push(EDU_OPEN.to_string());
            out.extend(edu.words().iter().cloned());
            out.push(EDU_CLOSE.to_string());
        }
        RstTree::Node {
            label,
            nuclearity,
            left,
            right,
        } => {
            out.push(OPEN.to_string());
            out.push(format!("{REL_PREFIX}{label}"));
            out.push(nuclearity.token().to_string());
            emit(left, out);
            emit(right, out);
            out.push(CLOSE.to_string());
        }
    }
}

struct Frame {
    label: Option<RelationLabel>,
    nuclearity: Option<Nuclearity>,
    children: Vec<RstTree>,
}

/// Parses a token sequence in one left-to-right pass with an explicit stack.
/// Accepts arbitrary input; anything `linearize` could not have produced is
/// rejected.
pub fn parse(tokens: &TokenSequence, vocab: &RelationVocab) -> Result<RstTree, ParseError> {
    use ParseErrorKind::*;

    let mut stack: Vec<Frame> = Vec::new();
    let mut root: Option<RstTree> = None;
    let mut edu: Option<Vec<String>> = None;
    let mut next_edu = 0usize;

    for (pos, tok) in tokens.tokens().iter().enumerate() {
        let tok = tok.as_str();
        let completed = if let Some(words) = edu.as_mut() {
            if tok == EDU_CLOSE {
                if words.is_empty() {
                    return Err(ParseError::at(pos, EmptyEdu));
                }
                let leaf = RstTree::Leaf(Edu::new_unchecked(next_edu, edu.take().unwrap()));
                next_edu += 1;
                Some(leaf)
            } else if is_valid_word(tok) {
                words.push(tok.to_string());
                None
            } else {
                return Err(ParseError::at(pos, UnexpectedToken));
            }
        } else if root.is_some() {
            return Err(ParseError::at(pos, TrailingTokens));
        } else if let Some(frame) = stack.last_mut() {
            if frame.label.is_none() {
                let name = tok
                    .strip_prefix(REL_PREFIX)
                    .ok_or(ParseError::at(pos, UnexpectedToken))?;
                if !vocab.contains(name) {
                    return Err(ParseError::at(pos, UnknownRelation));
                }
                frame.label = Some(RelationLabel::new(name));
                None
            } else if frame.nuclearity.is_none() {
                frame.nuclearity = Some(match tok {
                    NUC_LEFT => Nuclearity::Left,
                    NUC_RIGHT => Nuclearity::Right,
                    _ => return Err(ParseError::at(pos, UnexpectedToken)),
                });
                None
            } else {
                match tok {
                    OPEN | EDU_OPEN if frame.children.len() == 2 => {
                        return Err(ParseError::at(pos, BadArity))
                    }
                    OPEN => {
                        stack.push(Frame {
                            label: None,
                            nuclearity: None,
                            children: Vec::with_capacity(2),
                        });
                        None
                    }
                    EDU_OPEN => {
                        edu = Some(Vec::new());
                        None
                    }
                    CLOSE if frame.children.len() != 2 => {
                        return Err(ParseError::at(pos, BadArity))
                    }
                    CLOSE => {
                        let frame = stack.pop().unwrap();
                        let mut children = frame.children.into_iter();
                        let left = children.next().unwrap();
                        let right = children.next().unwrap();
                        Some(RstTree::Node {
                            label: frame.label.unwrap(),
                            nuclearity: frame.nuclearity.unwrap(),
                            left: Box::new(left),
                            right: Box::new(right),
                        })
                    }
                    _ => return Err(ParseError::at(pos, UnexpectedToken)),
                }
            }
        } else {
            match tok {
                OPEN => {
                    stack.push(Frame {
                        label: None,
                        nuclearity: None,
                        children: Vec::with_capacity(2),
                    });
                    None
                }
                EDU_OPEN => {
                    edu = Some(Vec::new());
                    None
                }
                CLOSE => return Err(ParseError::at(pos, UnbalancedParen)),
                _ => return Err(ParseError::at(pos, UnexpectedToken)),
            }
        };

        if let Some(tree) = completed {
            match stack.last_mut() {
                Some(parent) => parent.children.push(tree),
                None => root = Some(tree),
            }
        }
    }

    let end = tokens.len();
    if edu.is_some() {
        return Err(ParseError::at(end, UnexpectedToken));
    }
    if !stack.is_empty() {
        return Err(ParseError::at(end, UnbalancedParen));
    }
    root.ok_or(ParseError::at(end, UnexpectedToken))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn coffee_spill() -> RstTree {
        RstTree::node(
            "Cause",
            Nuclearity::Right,
            RstTree::leaf(Edu::from_text(0, "person spills coffee on shirt").unwrap()),
            RstTree::node(
                "Elaboration",
                Nuclearity::Left,
                RstTree::leaf(
                    Edu::from_text(1, "person goes to bathroom and cleans stains").unwrap(),
                ),
                RstTree::leaf(Edu::from_text(2, "person dries shirt with handkerchief").unwrap()),
            ),
        )
    }

    const COFFEE_SPILL_LINE: &str =
        "( REL:Cause NUC:RIGHT <edu> person spills coffee on shirt </edu> \
        ( REL:Elaboration NUC:LEFT <edu> person goes to bathroom and cleans stains </edu> \
        <edu> person dries shirt with handkerchief </edu> ) )";

    fn kind(line: &str) -> ParseErrorKind {
        parse(&TokenSequence::from_line(line), &RelationVocab::default())
            .unwrap_err()
            .kind
    }

    #[test]
    fn coffee_spill_linearizes() {
        assert_eq!(
            linearize(&coffee_spill()).to_string(),
            TokenSequence::from_line(COFFEE_SPILL_LINE).to_string()
        );
    }

    #[test]
    fn coffee_spill_parses() {
        let t = parse(
            &TokenSequence::from_line(COFFEE_SPILL_LINE),
            &RelationVocab::default(),
        )
        .unwrap();
        assert_eq!(t, coffee_spill());
        assert_eq!(
            relation_list(&t),
            vec![
                RelationLabel::new("Cause"),
                RelationLabel::new("Elaboration")
            ]
        );
        assert_eq!(edge_list(&t), vec![Nuclearity::Right, Nuclearity::Left]);
    }

    #[test]
    fn single_leaf() {
        let leaf = RstTree::leaf(Edu::new(0, ["a"]).unwrap());
        assert_eq!(linearize(&leaf).to_string(), "<edu> a </edu>");
        assert_eq!(
            parse(&linearize(&leaf), &RelationVocab::default()).unwrap(),
            leaf
        );
    }

    #[test]
    fn error_kinds() {
        use ParseErrorKind::*;
        assert_eq!(kind("( REL:Cause NUC:LEFT <edu> a </edu>"), UnbalancedParen);
        assert_eq!(kind("( REL:Cause"), UnbalancedParen);
        assert_eq!(kind("<edu> </edu>"), EmptyEdu);
        assert_eq!(
            kind("( REL:Foo NUC:LEFT <edu> a </edu> <edu> b </edu> )"),
            UnknownRelation
        );
        assert_eq!(kind("( REL:Cause NUC:LEFT <edu> a </edu> )"), BadArity);
        assert_eq!(
            kind("( REL:Cause NUC:LEFT <edu> a </edu> <edu> b </edu> <edu> c </edu> )"),
            BadArity
        );
        assert_eq!(kind("<edu> a </edu> <edu> b </edu>"), TrailingTokens);
        assert_eq!(kind("<edu> a </edu> )"), TrailingTokens);
        assert_eq!(kind(")"), UnbalancedParen);
        assert_eq!(kind(""), UnexpectedToken);
        assert_eq!(kind("<edu> a"), UnexpectedToken);
        assert_eq!(kind("<edu> A </edu>"), UnexpectedToken);
        assert_eq!(
            kind("( NUC:LEFT REL:Cause <edu> a </edu> <edu> b </edu> )"),
            UnexpectedToken
        );
        assert_eq!(
            kind("( REL:Cause <edu> a </edu> <edu> b </edu> )"),
            UnexpectedToken
        );
        assert_eq!(kind("word"), UnexpectedToken);
        assert_eq!(kind("<edu> a <s> </edu>"), UnexpectedToken);
    }

    #[test]
    fn error_position() {
        let err = parse(
            &TokenSequence::from_line("<edu> a </edu> b"),
            &RelationVocab::default(),
        )
        .unwrap_err();
        assert_eq!(err.position, 3);
    }
}

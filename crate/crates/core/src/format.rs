//! Plain-text formats.
//!
//! Partial rankings, one reviewer per line, best first, parentheses marking a
//! tie group:
//!
//! ```text
//! 0: 3 1 (4 2) 7
//! ```
//!
//! Rankings are whitespace-separated ids, best first. Constraint files list
//! forbidden proposals per reviewer as `reviewer_id: id id ...`. Blank lines
//! and lines starting with `#` are ignored everywhere.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::ranking::{PartialRanking, ProposalId, Ranking};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_id(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a non-negative integer, found `{tok}`"),
    })
}

fn split_header(l: &str, line: usize) -> Result<(usize, &str)> {
    let (head, rest) = l.split_once(':').ok_or_else(|| Error::Parse {
        line,
        msg: "missing `reviewer_id:` prefix".into(),
    })?;
    Ok((parse_id(head.trim(), line)?, rest))
}

fn parse_groups(body: &str, line: usize) -> Result<Vec<Vec<ProposalId>>> {
    let mut groups = Vec::new();
    let mut open: Option<Vec<ProposalId>> = None;
    // Pad parentheses so `(1 2)` and `( 1 2 )` tokenize the same way.
    let spaced = body.replace('(', " ( ").replace(')', " ) ");
    for tok in spaced.split_whitespace() {
        match (tok, open.as_mut()) {
            ("(", None) => open = Some(Vec::new()),
            ("(", Some(_)) => {
                return Err(Error::Parse {
                    line,
                    msg: "nested tie group".into(),
                })
            }
            (")", Some(g)) => {
                if g.is_empty() {
                    return Err(Error::Parse {
                        line,
                        msg: "empty tie group".into(),
                    });
                }
                groups.push(open.take().unwrap_or_default());
            }
            (")", None) => {
                return Err(Error::Parse {
                    line,
                    msg: "unmatched `)`".into(),
                })
            }
            (t, Some(g)) => g.push(parse_id(t, line)?),
            (t, None) => groups.push(vec![parse_id(t, line)?]),
        }
    }
    if open.is_some() {
        return Err(Error::Parse {
            line,
            msg: "unterminated tie group".into(),
        });
    }
    Ok(groups)
}

pub fn parse_partials(text: &str) -> Result<Vec<PartialRanking>> {
    content_lines(text)
        .map(|(line, l)| {
            let (reviewer, body) = split_header(l, line)?;
            let groups = parse_groups(body, line)?;
            PartialRanking::new(reviewer, groups).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn render_partials(partials: &[PartialRanking]) -> String {
    let mut out = String::new();
    for p in partials {
        write!(out, "{}:", p.reviewer()).unwrap();
        for g in p.groups() {
            match g.as_slice() {
                [id] => write!(out, " {id}").unwrap(),
                ids => {
                    out.push_str(" (");
                    let inner: Vec<String> = ids.iter().map(ToString::to_string).collect();
                    out.push_str(&inner.join(" "));
                    out.push(')');
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_ranking(text: &str) -> Result<Ranking> {
    let mut order = Vec::new();
    for (line, l) in content_lines(text) {
        for tok in l.split_whitespace() {
            order.push(parse_id(tok, line)?);
        }
    }
    Ranking::new(order)
}

pub fn render_ranking(r: &Ranking) -> String {
    let ids: Vec<String> = r.as_slice().iter().map(ToString::to_string).collect();
    ids.join(" ") + "\n"
}

/// `(reviewer, forbidden proposals)` entries from a constraints file.
pub fn parse_constraints(text: &str) -> Result<Vec<(usize, Vec<ProposalId>)>> {
    content_lines(text)
        .map(|(line, l)| {
            let (reviewer, body) = split_header(l, line)?;
            let ids = body
                .split_whitespace()
                .map(|t| parse_id(t, line))
                .collect::<Result<Vec<_>>>()?;
            Ok((reviewer, ids))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_ties_and_comments() {
        let text = "# header\n0: 3 1 (4 2) 7\n\n1: (0 2)  5\n";
        let ps = parse_partials(text).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].groups(), &[vec![3], vec![1], vec![4, 2], vec![7]]);
        assert_eq!(ps[1].reviewer(), 1);
        assert_eq!(ps[1].groups(), &[vec![0, 2], vec![5]]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [
            ("0: 1 2\n1 2 3\n", 2),
            ("0: 1 (2 3\n", 1),
            ("0: 1 2)\n", 1),
            ("0: ((1)\n", 1),
            ("0: 1 ()\n", 1),
            ("\n0: 1 x\n", 2),
            ("0: 1 1\n", 1),
        ] {
            match parse_partials(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn ranking_and_constraints() {
        let r = parse_ranking("2 0\n1 3\n").unwrap();
        assert_eq!(r.as_slice(), &[2, 0, 1, 3]);
        assert!(parse_ranking("0 2").is_err());
        let c = parse_constraints("0: 1 2\n3:\n").unwrap();
        assert_eq!(c, vec![(0, vec![1, 2]), (3, vec![])]);
    }

    fn arb_partial() -> impl Strategy<Value = PartialRanking> {
        (0usize..50, Just((0usize..30).collect::<Vec<_>>()).prop_shuffle(), 1usize..12, proptest::collection::vec(1usize..4, 12))
            .prop_map(|(rev, ids, len, sizes)| {
                let mut groups = Vec::new();
                let mut it = ids.into_iter().take(len).peekable();
                let mut s = sizes.into_iter();
                while it.peek().is_some() {
                    let g: Vec<_> = it.by_ref().take(s.next().unwrap_or(1)).collect();
                    groups.push(g);
                }
                PartialRanking::new(rev, groups).unwrap()
            })
    }

    proptest! {
        #[test]
        fn partials_round_trip(ps in proptest::collection::vec(arb_partial(), 0..6)) {
            prop_assert_eq!(parse_partials(&render_partials(&ps)).unwrap(), ps);
        }
    }
}

use super::span::SourceSpan;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    /// `$name`
    Temp(String),
    /// `#name`
    Tag(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Eq,
    Star,
    Plus,
    Minus,
    Ge,
    At,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Temp(s) => format!("`${s}`"),
            Tok::Tag(s) => format!("`#{s}`"),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Star => "`*`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::At => "`@`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let mut line = 1u32;
    let mut line_start = 0usize;
    while let Some(&(pos, c)) = chars.peek() {
        let span_at = |start: usize, end: usize, line: u32, line_start: usize| SourceSpan {
            line,
            column: (src[line_start..start].chars().count() + 1) as u32,
            start,
            end,
        };
        if c == '\n' {
            chars.next();
            line += 1;
            line_start = pos + 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let take_word = |chars: &mut std::iter::Peekable<std::str::CharIndices>, start: usize| -> usize {
            let mut end = start;
            while let Some(&(p, ch)) = chars.peek() {
                if is_ident_char(ch) {
                    end = p + ch.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            end
        };
        let tok = if is_ident_start(c) {
            let end = take_word(&mut chars, pos);
            Token {
                tok: Tok::Ident(src[pos..end].to_string()),
                span: span_at(pos, end, line, line_start),
            }
        } else if c.is_ascii_digit() {
            let mut end = pos;
            while let Some(&(p, ch)) = chars.peek() {
                if ch.is_ascii_digit() {
                    end = p + 1;
                    chars.next();
                } else {
                    break;
                }
            }
            let span = span_at(pos, end, line, line_start);
            let v = src[pos..end].parse::<i64>().map_err(|_| ParseError::Syntax {
                span,
                message: "integer literal out of range".into(),
            })?;
            Token { tok: Tok::Int(v), span }
        } else if c == '$' || c == '#' {
            chars.next();
            let start = pos + 1;
            match chars.peek() {
                Some(&(_, ch)) if is_ident_start(ch) => {}
                _ => {
                    return Err(ParseError::Syntax {
                        span: span_at(pos, start, line, line_start),
                        message: format!("expected a name after `{c}`"),
                    })
                }
            }
            let end = take_word(&mut chars, start);
            let name = src[start..end].to_string();
            Token {
                tok: if c == '$' { Tok::Temp(name) } else { Tok::Tag(name) },
                span: span_at(pos, end, line, line_start),
            }
        } else {
            chars.next();
            let mut end = pos + c.len_utf8();
            let tok = match c {
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                '*' => Tok::Star,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '@' => Tok::At,
                '>' => match chars.peek() {
                    Some(&(_, '=')) => {
                        chars.next();
                        end += 1;
                        Tok::Ge
                    }
                    _ => {
                        return Err(ParseError::Syntax {
                            span: span_at(pos, end, line, line_start),
                            message: "expected `>=`".into(),
                        })
                    }
                },
                other => {
                    return Err(ParseError::Syntax {
                        span: span_at(pos, end, line, line_start),
                        message: format!("unexpected character `{other}`"),
                    })
                }
            };
            Token {
                tok,
                span: span_at(pos, end, line, line_start),
            }
        };
        out.push(tok);
    }
    let end = src.len();
    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan {
            line,
            column: (src[line_start..].chars().count() + 1) as u32,
            start: end,
            end,
        },
    });
    Ok(out)
}

//! Indentation-aware tokenizer. Tabs in leading whitespace count as four
//! columns; newlines inside brackets or after a trailing comma continue the
//! logical line.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::diagnostic::{Diagnostic, codes};
use super::span::Span;

const TAB_WIDTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Punct {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Dot,
    Assign,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    At,
}

impl Punct {
    pub fn as_str(self) -> &'static str {
        match self {
            Punct::LParen => "(",
            Punct::RParen => ")",
            Punct::LBracket => "[",
            Punct::RBracket => "]",
            Punct::Comma => ",",
            Punct::Colon => ":",
            Punct::Dot => ".",
            Punct::Assign => "=",
            Punct::Eq => "==",
            Punct::Ne => "!=",
            Punct::Lt => "<",
            Punct::Gt => ">",
            Punct::Le => "<=",
            Punct::Ge => ">=",
            Punct::Plus => "+",
            Punct::Minus => "-",
            Punct::Star => "*",
            Punct::Slash => "/",
            Punct::Percent => "%",
            Punct::At => "@",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Name(String),
    Number(String),
    Str(String),
    Punct(Punct),
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Name(n) => format!("`{n}`"),
            TokenKind::Number(n) => format!("number `{n}`"),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::Punct(p) => format!("`{}`", p.as_str()),
            TokenKind::Newline => "end of line".into(),
            TokenKind::Indent => "indented block".into(),
            TokenKind::Dedent => "end of block".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    errors: Vec<Diagnostic>,
    indents: Vec<usize>,
    brackets: Vec<(Punct, Span)>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, tokens: Vec::new(), errors: Vec::new(), indents: alloc::vec![0], brackets: Vec::new() }
    }

    fn error(&mut self, code: &str, span: Span, msg: String) {
        self.errors.push(Diagnostic::error(code, span, msg, self.src));
    }

    fn push(&mut self, kind: TokenKind, start: usize, end: usize) {
        self.tokens.push(Token { kind, span: Span::new(start, end) });
    }

    fn continues_line(&self) -> bool {
        !self.brackets.is_empty()
            || matches!(self.tokens.last(), Some(Token { kind: TokenKind::Punct(Punct::Comma), .. }))
    }

    fn run(mut self) -> Result<Vec<Token>, Vec<Diagnostic>> {
        let src = self.src;
        let mut line_start = 0;
        let mut logical_open = false;
        while line_start < src.len() {
            let line_end = src[line_start..].find('\n').map_or(src.len(), |i| line_start + i);
            let line = &src[line_start..line_end];
            let body = line.trim_start_matches([' ', '\t', '\r']);
            let blank = body.trim_end_matches('\r').is_empty() || body.starts_with('#');

            if !blank {
                if !logical_open {
                    let width = line[..line.len() - body.len()]
                        .chars()
                        .fold(0, |w, c| if c == '\t' { (w / TAB_WIDTH + 1) * TAB_WIDTH } else if c == ' ' { w + 1 } else { w });
                    let at = line_start + (line.len() - body.len());
                    self.indentation(width, at);
                }
                self.scan_line(line_start + (line.len() - body.len()), line_end);
                logical_open = self.continues_line();
                if !logical_open {
                    self.push(TokenKind::Newline, line_end, line_end);
                }
            }
            line_start = line_end + 1;
        }

        let end = src.len();
        if let Some(&(p, span)) = self.brackets.first() {
            self.error(codes::SYNTAX, span, format!("`{}` is never closed", p.as_str()));
        }
        if logical_open && self.brackets.is_empty() {
            self.push(TokenKind::Newline, end, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokenKind::Dedent, end, end);
        }
        self.push(TokenKind::Eof, end, end);

        if self.errors.is_empty() { Ok(self.tokens) } else { Err(self.errors) }
    }

    fn indentation(&mut self, width: usize, at: usize) {
        let current = *self.indents.last().unwrap();
        if width > current {
            self.indents.push(width);
            self.push(TokenKind::Indent, at, at);
        } else if width < current {
            while *self.indents.last().unwrap() > width {
                self.indents.pop();
                self.push(TokenKind::Dedent, at, at);
            }
            if *self.indents.last().unwrap() != width {
                self.error(
                    codes::INDENT,
                    Span::new(at.saturating_sub(width), at),
                    "unindent does not match any outer indentation level".into(),
                );
                self.indents.push(width);
            }
        }
    }

    fn scan_line(&mut self, start: usize, end: usize) {
        let src = self.src;
        let bytes = src.as_bytes();
        let mut i = start;
        while i < end {
            let c = bytes[i];
            match c {
                b' ' | b'\t' | b'\r' => i += 1,
                b'#' => break,
                b'\'' | b'"' => i = self.string(i, end, c),
                b'0'..=b'9' => i = self.number(i, end),
                b'.' if i + 1 < end && bytes[i + 1].is_ascii_digit() => i = self.number(i, end),
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut j = i + 1;
                    while j < end && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                        j += 1;
                    }
                    self.push(TokenKind::Name(src[i..j].into()), i, j);
                    i = j;
                }
                _ => i = self.punct(i, end),
            }
        }
    }

    fn string(&mut self, start: usize, end: usize, quote: u8) -> usize {
        let src = self.src;
        let mut value = String::new();
        let mut chars = src[start + 1..end].char_indices();
        while let Some((off, c)) = chars.next() {
            let pos = start + 1 + off;
            match c {
                '\\' => match chars.next() {
                    Some((_, 'n')) => value.push('\n'),
                    Some((_, 't')) => value.push('\t'),
                    Some((_, e @ ('\\' | '\'' | '"'))) => value.push(e),
                    Some((o, e)) => {
                        let at = start + 1 + o;
                        self.error(codes::LEX, Span::new(pos, at + e.len_utf8()), format!("unknown escape `\\{e}`"));
                    }
                    None => break,
                },
                c if c as u32 == quote as u32 => {
                    self.push(TokenKind::Str(value), start, pos + 1);
                    return pos + 1;
                }
                c => value.push(c),
            }
        }
        self.error(codes::LEX, Span::new(start, end), "unterminated string literal".into());
        end
    }

    fn number(&mut self, start: usize, end: usize) -> usize {
        let bytes = self.src.as_bytes();
        let mut j = start;
        while j < end && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j < end && bytes[j] == b'.' && j + 1 < end && bytes[j + 1].is_ascii_digit() {
            j += 1;
            while j < end && bytes[j].is_ascii_digit() {
                j += 1;
            }
        }
        if j < end && (bytes[j] == b'e' || bytes[j] == b'E') {
            let mut k = j + 1;
            if k < end && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < end && bytes[k].is_ascii_digit() {
                while k < end && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                j = k;
            }
        }
        if j < end && (bytes[j].is_ascii_alphabetic() || bytes[j] == b'_') {
            let mut k = j;
            while k < end && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                k += 1;
            }
            self.error(codes::LEX, Span::new(start, k), format!("malformed number `{}`", &self.src[start..k]));
            return k;
        }
        let mut lexeme = String::from(&self.src[start..j]);
        if lexeme.starts_with('.') {
            lexeme.insert(0, '0');
        }
        self.push(TokenKind::Number(lexeme), start, j);
        j
    }

    fn punct(&mut self, i: usize, end: usize) -> usize {
        let bytes = self.src.as_bytes();
        let next = if i + 1 < end { bytes[i + 1] } else { 0 };
        let (p, len) = match (bytes[i], next) {
            (b'=', b'=') => (Punct::Eq, 2),
            (b'!', b'=') => (Punct::Ne, 2),
            (b'<', b'=') => (Punct::Le, 2),
            (b'>', b'=') => (Punct::Ge, 2),
            (b'(', _) => (Punct::LParen, 1),
            (b')', _) => (Punct::RParen, 1),
            (b'[', _) => (Punct::LBracket, 1),
            (b']', _) => (Punct::RBracket, 1),
            (b',', _) => (Punct::Comma, 1),
            (b':', _) => (Punct::Colon, 1),
            (b'.', _) => (Punct::Dot, 1),
            (b'=', _) => (Punct::Assign, 1),
            (b'<', _) => (Punct::Lt, 1),
            (b'>', _) => (Punct::Gt, 1),
            (b'+', _) => (Punct::Plus, 1),
            (b'-', _) => (Punct::Minus, 1),
            (b'*', _) => (Punct::Star, 1),
            (b'/', _) => (Punct::Slash, 1),
            (b'%', _) => (Punct::Percent, 1),
            (b'@', _) => (Punct::At, 1),
            _ => {
                let ch = self.src[i..].chars().next().unwrap();
                let w = ch.len_utf8();
                self.error(codes::LEX, Span::new(i, i + w), format!("unknown token `{ch}`"));
                return i + w;
            }
        };
        let span = Span::new(i, i + len);
        match p {
            Punct::LParen | Punct::LBracket => self.brackets.push((p, span)),
            Punct::RParen | Punct::RBracket => {
                let want = if p == Punct::RParen { Punct::LParen } else { Punct::LBracket };
                match self.brackets.last() {
                    Some((open, _)) if *open == want => {
                        self.brackets.pop();
                    }
                    _ => self.error(codes::SYNTAX, span, format!("unmatched `{}`", p.as_str())),
                }
            }
            _ => {}
        }
        self.push(TokenKind::Punct(p), i, i + len);
        i + len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn name(s: &str) -> TokenKind {
        TokenKind::Name(s.into())
    }

    #[test]
    fn indentation_blocks() {
        let k = kinds("behavior B():\n    wait\n\n    # c\n    wait\nx = 1\n");
        assert_eq!(
            k,
            vec![
                name("behavior"),
                name("B"),
                TokenKind::Punct(Punct::LParen),
                TokenKind::Punct(Punct::RParen),
                TokenKind::Punct(Punct::Colon),
                TokenKind::Newline,
                TokenKind::Indent,
                name("wait"),
                TokenKind::Newline,
                name("wait"),
                TokenKind::Newline,
                TokenKind::Dedent,
                name("x"),
                TokenKind::Punct(Punct::Assign),
                TokenKind::Number("1".into()),
                TokenKind::Newline,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn tabs_match_four_spaces() {
        let a = kinds("behavior B():\n\twait\n    wait\n");
        assert!(!a.contains(&TokenKind::Dedent) || a.iter().filter(|k| **k == TokenKind::Dedent).count() == 1);
        assert_eq!(a.iter().filter(|k| **k == TokenKind::Indent).count(), 1);
    }

    #[test]
    fn trailing_comma_and_brackets_continue() {
        let k = kinds("a = f(1,\n  2)\nb = new Car at x,\n    facing y\n");
        assert_eq!(k.iter().filter(|k| **k == TokenKind::Newline).count(), 2);
        assert!(!k.contains(&TokenKind::Indent));
    }

    #[test]
    fn lexical_errors() {
        let errs = tokenize("x = 'open\ny = $").unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|d| d.code == codes::LEX));
        assert_eq!(errs[1].col, 5);
    }

    #[test]
    fn bad_dedent() {
        let errs = tokenize("behavior B():\n        wait\n    wait\n").unwrap_err();
        assert_eq!(errs[0].code, codes::INDENT);
    }

    #[test]
    fn numbers_and_strings() {
        assert_eq!(
            kinds("1.5e3 .5 'a\\'b'")[..3],
            [TokenKind::Number("1.5e3".into()), TokenKind::Number("0.5".into()), TokenKind::Str("a'b".into())]
        );
    }
}

//! Recursive-descent parser with statement-level error recovery.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::diagnostic::{Diagnostic, codes};
use super::lexer::{Punct, Token, TokenKind, tokenize};
use super::span::{Ident, Span, Spanned};

type PResult<T> = Result<T, ()>;

/// Words that end an expression instead of starting one.
const STOP_WORDS: &[&str] = &[
    "by", "to", "for", "until", "seconds", "steps", "when", "of", "with", "and", "or", "deg", "from",
];

const TOP_LEVEL_KEYWORDS: &[&str] = &["param", "model", "behavior", "require", "terminate", "new"];

pub fn parse_tree(source: &str) -> Result<ScenarioTree, Vec<Diagnostic>> {
    let tokens = tokenize(source)?;
    let mut p = Parser { src: source, tokens, pos: 0, errors: Vec::new() };
    let tree = p.script();
    if p.errors.is_empty() {
        p.structure(&tree);
    }
    if p.errors.is_empty() { Ok(tree) } else { Err(p.errors) }
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<Diagnostic>,
}

impl<'a> Parser<'a> {
    // ---- token helpers ----

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_name(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Name(n) if n == kw)
    }

    fn at_punct(&self, p: Punct) -> bool {
        self.peek().kind == TokenKind::Punct(p)
    }

    fn eat_name(&mut self, kw: &str) -> Option<Span> {
        if self.at_name(kw) { Some(self.bump().span) } else { None }
    }

    fn eat_punct(&mut self, p: Punct) -> Option<Span> {
        if self.at_punct(p) { Some(self.bump().span) } else { None }
    }

    fn error(&mut self, code: &str, span: Span, msg: String) -> Diagnostic {
        Diagnostic::error(code, span, msg, self.src)
    }

    fn fail<T>(&mut self, msg: String) -> PResult<T> {
        let span = self.peek().span;
        let d = self.error(codes::SYNTAX, span, msg);
        self.errors.push(d);
        Err(())
    }

    fn unexpected<T>(&mut self, expected: &str) -> PResult<T> {
        let found = self.peek().kind.describe();
        self.fail(format!("expected {expected}, found {found}"))
    }

    fn expect_name(&mut self, kw: &str) -> PResult<Span> {
        match self.eat_name(kw) {
            Some(s) => Ok(s),
            None => self.unexpected(&format!("`{kw}`")),
        }
    }

    fn expect_punct(&mut self, p: Punct) -> PResult<Span> {
        match self.eat_punct(p) {
            Some(s) => Ok(s),
            None => self.unexpected(&format!("`{}`", p.as_str())),
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        if self.peek().kind == TokenKind::Newline {
            self.bump();
            Ok(())
        } else {
            self.unexpected("end of line")
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Ident> {
        match &self.peek().kind {
            TokenKind::Name(n) if !STOP_WORDS.contains(&n.as_str()) => {
                let t = self.bump();
                let TokenKind::Name(n) = t.kind else { unreachable!() };
                Ok(Spanned::new(n, t.span))
            }
            _ => self.unexpected(what),
        }
    }

    /// Skips the rest of the current statement, including any nested block.
    /// Stops before a `Dedent` that closes the enclosing block.
    fn skip_statement(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek().kind {
                TokenKind::Eof => return,
                TokenKind::Indent => depth += 1,
                TokenKind::Dedent => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        if self.peek().kind != TokenKind::Indent {
                            return;
                        }
                        continue;
                    }
                }
                TokenKind::Newline if depth == 0 => {
                    self.bump();
                    if self.peek().kind != TokenKind::Indent {
                        return;
                    }
                    continue;
                }
                _ => {}
            }
            self.bump();
        }
    }

    // ---- top level ----

    fn script(&mut self) -> ScenarioTree {
        let mut tree = ScenarioTree::default();
        loop {
            match self.peek().kind {
                TokenKind::Eof => break,
                TokenKind::Newline | TokenKind::Dedent => {
                    self.bump();
                }
                TokenKind::Indent => {
                    let span = self.peek().span;
                    let d = self.error(codes::SYNTAX, span, "unexpected indentation".into());
                    self.errors.push(d);
                    self.skip_statement();
                    if self.peek().kind == TokenKind::Dedent {
                        self.bump();
                    }
                }
                _ => {
                    if self.top_level(&mut tree).is_err() {
                        self.skip_statement();
                    }
                }
            }
        }
        tree
    }

    fn top_level(&mut self, tree: &mut ScenarioTree) -> PResult<()> {
        if self.eat_name("param").is_some() {
            loop {
                let name = self.ident("parameter name")?;
                self.expect_punct(Punct::Assign)?;
                let value = self.expr()?;
                tree.params.push(ParamDecl { name, value });
                if self.eat_punct(Punct::Comma).is_none() || self.peek().kind == TokenKind::Newline {
                    break;
                }
            }
            return self.expect_newline();
        }
        if let Some(kw) = self.eat_name("model") {
            let first = self.ident("model path")?;
            let mut path = first.value.clone();
            let mut span = kw.to(first.span);
            while self.eat_punct(Punct::Dot).is_some() {
                let part = self.ident("model path component")?;
                path.push('.');
                path.push_str(&part.value);
                span = span.to(part.span);
            }
            if tree.model_import.is_some() {
                let d = self.error(codes::MULTIPLE_MODELS, span, "only one `model` line is allowed".into());
                self.errors.push(d);
            }
            tree.model_import = Some(Spanned::new(path, first.span.to(span)));
            return self.expect_newline();
        }
        if self.at_name("behavior") {
            let b = self.behavior()?;
            tree.behaviors.push(b);
            return Ok(());
        }
        if self.eat_name("require").is_some() {
            let e = self.expr()?;
            tree.requirements.push(e);
            return self.expect_newline();
        }
        if self.eat_name("terminate").is_some() {
            let t = if self.eat_name("when").is_some() {
                Termination::When(self.expr()?)
            } else if self.eat_name("after").is_some() {
                let amount = self.expr()?;
                let unit = self.time_unit()?;
                Termination::After { amount, unit }
            } else {
                return self.unexpected("`when` or `after`");
            };
            tree.terminations.push(t);
            return self.expect_newline();
        }
        let is_binding = matches!(self.peek().kind, TokenKind::Name(_))
            && self.peek_at(1).kind == TokenKind::Punct(Punct::Assign);
        if is_binding {
            let o = self.object()?;
            tree.objects.push(o);
            return self.expect_newline();
        }
        if self.at_name("new") {
            return self.fail("objects must be bound to a name, as in `car = new Car ...`".into());
        }
        match self.peek().kind.clone() {
            TokenKind::Name(n) => {
                let span = self.peek().span;
                let mut d = self.error(codes::SYNTAX, span, format!("unsupported statement `{n}`"));
                if let Some(s) = closest(&n, TOP_LEVEL_KEYWORDS) {
                    d = d.with_hint(format!("did you mean `{s}`?"));
                }
                self.errors.push(d);
                Err(())
            }
            _ => self.unexpected("a declaration"),
        }
    }

    fn time_unit(&mut self) -> PResult<TimeUnit> {
        if self.eat_name("seconds").is_some() {
            Ok(TimeUnit::Seconds)
        } else if self.eat_name("steps").is_some() {
            Ok(TimeUnit::Steps)
        } else {
            self.unexpected("`seconds` or `steps`")
        }
    }

    fn object(&mut self) -> PResult<ObjectDecl> {
        let name = self.ident("object name")?;
        self.expect_punct(Punct::Assign)?;
        if self.eat_name("new").is_none() {
            let span = self.peek().span;
            let found = self.peek().kind.describe();
            let mut d = self.error(
                codes::SYNTAX,
                span,
                format!("expected `new` after `{} =`, found {found}", name.value),
            );
            if let TokenKind::Name(n) = &self.peek().kind {
                if closest(n, &["new"]).is_some() {
                    d = d.with_hint("did you mean `new`?");
                }
            }
            self.errors.push(d);
            return Err(());
        }
        let class = self.ident("object class")?;
        let mut obj = ObjectDecl { name, class, specifiers: Vec::new(), properties: Vec::new() };
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut first = true;
        while self.peek().kind != TokenKind::Newline {
            if !first {
                self.expect_punct(Punct::Comma)?;
                if self.peek().kind == TokenKind::Newline {
                    break;
                }
            }
            first = false;
            let (key, span) = self.specifier(&mut obj)?;
            if !seen.insert(key.clone()) {
                let d = self
                    .error(codes::DUPLICATE_SPECIFIER, span, format!("`{key}` is given more than once for `{}`", obj.name.value));
                self.errors.push(d);
            }
        }
        Ok(obj)
    }

    /// Parses one specifier into `obj`; returns its duplicate-detection key.
    fn specifier(&mut self, obj: &mut ObjectDecl) -> PResult<(String, Span)> {
        let start = self.peek().span;
        if self.eat_name("with").is_some() {
            let name = self.ident("property name")?;
            let value = self.expr()?;
            let key = format!("with {}", name.value);
            let span = start.to(name.span);
            obj.properties.push(Property { name, value });
            return Ok((key, span));
        }
        let kind = if self.eat_name("at").is_some() {
            SpecifierKind::At
        } else if self.eat_name("offset").is_some() {
            self.expect_name("by")?;
            SpecifierKind::OffsetBy
        } else if self.eat_name("ahead").is_some() {
            self.expect_name("of")?;
            SpecifierKind::AheadOf
        } else if self.eat_name("behind").is_some() {
            SpecifierKind::Behind
        } else if self.eat_name("left").is_some() {
            self.expect_name("of")?;
            SpecifierKind::LeftOf
        } else if self.eat_name("right").is_some() {
            self.expect_name("of")?;
            SpecifierKind::RightOf
        } else if self.eat_name("facing").is_some() {
            if self.eat_name("toward").is_some() { SpecifierKind::FacingToward } else { SpecifierKind::Facing }
        } else if self.eat_name("on").is_some() {
            SpecifierKind::On
        } else {
            let found = self.peek().kind.describe();
            let mut d = self.error(codes::SYNTAX, start, format!("unknown specifier {found}"));
            d = d.with_hint(
                "specifiers are: at, offset by, ahead of, behind, left of, right of, facing, facing toward, on, with",
            );
            self.errors.push(d);
            return Err(());
        };
        let kw_span = start.to(self.tokens[self.pos.saturating_sub(1)].span);
        let target = self.expr()?;
        let distance =
            if kind.takes_distance() && self.eat_name("by").is_some() { Some(self.expr()?) } else { None };
        obj.specifiers.push(Specifier { kind: Spanned::new(kind, kw_span), target, distance });
        Ok((String::from(kind.as_str()), kw_span))
    }

    // ---- behaviors ----

    fn behavior(&mut self) -> PResult<BehaviorDecl> {
        self.expect_name("behavior")?;
        let name = self.ident("behavior name")?;
        self.expect_punct(Punct::LParen)?;
        let mut params = Vec::new();
        while !self.at_punct(Punct::RParen) {
            let pname = self.ident("parameter name")?;
            let default = if self.eat_punct(Punct::Assign).is_some() { Some(self.expr()?) } else { None };
            params.push(FormalParam { name: pname, default });
            if self.eat_punct(Punct::Comma).is_none() {
                break;
            }
        }
        self.expect_punct(Punct::RParen)?;
        let body = self.block()?;
        Ok(BehaviorDecl { name, params, body })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        let colon = self.expect_punct(Punct::Colon)?;
        self.expect_newline()?;
        if self.peek().kind != TokenKind::Indent {
            let d = self.error(codes::UNTERMINATED_BLOCK, colon, "expected an indented block after `:`".into());
            self.errors.push(d);
            return Err(());
        }
        self.bump();
        let mut body = Vec::new();
        loop {
            match self.peek().kind {
                TokenKind::Dedent => {
                    self.bump();
                    break;
                }
                TokenKind::Eof => break,
                TokenKind::Newline => {
                    self.bump();
                }
                _ => match self.stmt() {
                    Ok(s) => body.push(s),
                    Err(()) => self.skip_statement(),
                },
            }
        }
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.eat_name("do").is_some() {
            let call = self.expr()?;
            let modifier = if self.eat_name("for").is_some() {
                let amount = self.expr()?;
                let unit = self.time_unit()?;
                Some(DoModifier::For { amount, unit })
            } else if self.eat_name("until").is_some() {
                Some(DoModifier::Until(self.expr()?))
            } else {
                None
            };
            self.expect_newline()?;
            return Ok(Stmt::Do { call, modifier });
        }
        if self.eat_name("take").is_some() {
            let mut actions = alloc::vec![self.expr()?];
            while self.eat_punct(Punct::Comma).is_some() {
                if self.peek().kind == TokenKind::Newline {
                    break;
                }
                actions.push(self.expr()?);
            }
            self.expect_newline()?;
            return Ok(Stmt::Take(actions));
        }
        for (kw, s) in [("wait", Stmt::Wait), ("terminate", Stmt::Terminate), ("pass", Stmt::Pass)] {
            if self.eat_name(kw).is_some() {
                self.expect_newline()?;
                return Ok(s);
            }
        }
        if self.eat_name("while").is_some() {
            let cond = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_name("if").is_some() {
            let cond = self.expr()?;
            let mut branches = alloc::vec![(cond, self.block()?)];
            let mut orelse = None;
            loop {
                if self.eat_name("elif").is_some() {
                    let c = self.expr()?;
                    branches.push((c, self.block()?));
                } else if self.eat_name("else").is_some() {
                    orelse = Some(self.block()?);
                    break;
                } else {
                    break;
                }
            }
            return Ok(Stmt::If { branches, orelse });
        }
        if self.eat_name("try").is_some() {
            let body = self.block()?;
            let mut handlers = Vec::new();
            while self.eat_name("interrupt").is_some() {
                self.expect_name("when")?;
                let cond = self.expr()?;
                handlers.push(Interrupt { cond, body: self.block()? });
            }
            if handlers.is_empty() {
                return self.unexpected("`interrupt when` after `try` block");
            }
            return Ok(Stmt::Try { body, handlers });
        }
        let is_assign = matches!(self.peek().kind, TokenKind::Name(_))
            && self.peek_at(1).kind == TokenKind::Punct(Punct::Assign);
        if is_assign {
            let target = self.ident("variable")?;
            self.bump();
            let value = self.expr()?;
            self.expect_newline()?;
            return Ok(Stmt::Assign { target, value });
        }
        match self.peek().kind.clone() {
            TokenKind::Name(n) => {
                let span = self.peek().span;
                let mut d = self.error(codes::SYNTAX, span, format!("unsupported behavior statement `{n}`"));
                if let Some(s) = closest(&n, &["do", "take", "wait", "terminate", "while", "if", "try", "pass"]) {
                    d = d.with_hint(format!("did you mean `{s}`?"));
                }
                self.errors.push(d);
                Err(())
            }
            _ => self.unexpected("a behavior statement"),
        }
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        self.expr_bp(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match &self.peek().kind {
            TokenKind::Name(n) if n == "or" => BinOp::Or,
            TokenKind::Name(n) if n == "and" => BinOp::And,
            TokenKind::Punct(p) => match p {
                Punct::Eq => BinOp::Eq,
                Punct::Ne => BinOp::Ne,
                Punct::Lt => BinOp::Lt,
                Punct::Gt => BinOp::Gt,
                Punct::Le => BinOp::Le,
                Punct::Ge => BinOp::Ge,
                Punct::Plus => BinOp::Add,
                Punct::Minus => BinOp::Sub,
                Punct::Star => BinOp::Mul,
                Punct::Slash => BinOp::Div,
                Punct::Percent => BinOp::Mod,
                Punct::At => BinOp::Vec,
                _ => return None,
            },
            _ => return None,
        })
    }

    fn expr_bp(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.prefix()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min {
                break;
            }
            self.bump();
            let rhs = self.expr_bp(prec + 1)?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> PResult<Expr> {
        if self.eat_punct(Punct::Minus).is_some() {
            let operand = self.expr_bp(PREC_UNARY)?;
            return Ok(Expr::Unary { op: UnaryOp::Neg, operand: Box::new(operand) });
        }
        if self.eat_name("not").is_some() {
            let operand = self.expr_bp(PREC_NOT)?;
            return Ok(Expr::Unary { op: UnaryOp::Not, operand: Box::new(operand) });
        }
        let atom = self.atom()?;
        self.postfix(atom)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            if self.eat_punct(Punct::Dot).is_some() {
                let t = self.bump();
                let TokenKind::Name(n) = t.kind else {
                    self.pos -= 1;
                    return self.unexpected("attribute name");
                };
                e = Expr::Attr { base: Box::new(e), attr: Spanned::new(n, t.span) };
            } else if self.eat_punct(Punct::LParen).is_some() {
                let args = self.call_args()?;
                e = Expr::Call { callee: Box::new(e), args };
            } else if self.eat_name("deg").is_some() {
                e = Expr::Degrees(Box::new(e));
            } else {
                return Ok(e);
            }
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Arg>> {
        let mut args = Vec::new();
        while !self.at_punct(Punct::RParen) {
            let keyword = matches!(self.peek().kind, TokenKind::Name(_))
                && self.peek_at(1).kind == TokenKind::Punct(Punct::Assign);
            let name = if keyword {
                let n = self.ident("argument name")?;
                self.bump();
                Some(n)
            } else {
                None
            };
            let value = self.expr()?;
            args.push(Arg { name, value });
            if self.eat_punct(Punct::Comma).is_none() {
                break;
            }
        }
        self.expect_punct(Punct::RParen)?;
        Ok(args)
    }

    fn sequence(&mut self, close: Punct) -> PResult<(Vec<Expr>, bool)> {
        let mut items = Vec::new();
        let mut trailing_comma = false;
        while !self.at_punct(close) {
            items.push(self.expr()?);
            trailing_comma = self.eat_punct(Punct::Comma).is_some();
            if !trailing_comma {
                break;
            }
        }
        self.expect_punct(close)?;
        Ok((items, trailing_comma))
    }

    fn atom(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Number(n) => {
                self.bump();
                Ok(Expr::Number(n))
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr::Str(Spanned::new(s, tok.span)))
            }
            TokenKind::Punct(Punct::LParen) => {
                self.bump();
                let (mut items, trailing) = self.sequence(Punct::RParen)?;
                if items.len() == 1 && !trailing {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(Expr::Tuple(items))
                }
            }
            TokenKind::Punct(Punct::LBracket) => {
                self.bump();
                let (items, _) = self.sequence(Punct::RBracket)?;
                Ok(Expr::List(items))
            }
            TokenKind::Name(n) => match n.as_str() {
                "True" | "False" => {
                    self.bump();
                    Ok(Expr::Bool(n == "True"))
                }
                "None" => {
                    self.bump();
                    Ok(Expr::None)
                }
                "distance" => {
                    self.bump();
                    let from = if self.eat_name("from").is_some() {
                        Some(Box::new(self.expr_bp(PREC_ADDITIVE)?))
                    } else {
                        None
                    };
                    self.expect_name("to")?;
                    let to = Box::new(self.expr_bp(PREC_ADDITIVE)?);
                    Ok(Expr::Distance { from, to })
                }
                _ if STOP_WORDS.contains(&n.as_str()) => self.unexpected("an expression"),
                _ => {
                    self.bump();
                    Ok(Expr::Name(Spanned::new(n, tok.span)))
                }
            },
            _ => self.unexpected("an expression"),
        }
    }

    // ---- structural checks ----

    fn structure(&mut self, tree: &ScenarioTree) {
        let egos: Vec<&ObjectDecl> = tree.objects.iter().filter(|o| o.name.as_str() == EGO).collect();
        match egos.len() {
            0 => {
                // Point at the first object, or the first line when there is none.
                let span = match tree.objects.first() {
                    Some(o) => o.name.span,
                    None => Span::new(0, self.src.find('\n').unwrap_or(self.src.len())),
                };
                let d = self
                    .error(codes::NO_EGO, span, "no object is bound to `ego`".into())
                    .with_hint("declare the camera vehicle, e.g. `ego = new Car on road`");
                self.errors.push(d);
            }
            1 => {}
            _ => {
                for o in &egos[1..] {
                    let d = self.error(codes::DUPLICATE_EGO, o.name.span, "`ego` is bound more than once".into());
                    self.errors.push(d);
                }
            }
        }
        let mut seen = BTreeSet::new();
        for o in tree.objects.iter().filter(|o| o.name.as_str() != EGO) {
            if !seen.insert(o.name.as_str()) {
                let d = self.error(codes::DUPLICATE_NAME, o.name.span, format!("object `{}` is declared twice", o.name.value));
                self.errors.push(d);
            }
        }
        let mut seen = BTreeSet::new();
        for b in &tree.behaviors {
            if !seen.insert(b.name.as_str()) {
                let d = self.error(codes::DUPLICATE_NAME, b.name.span, format!("behavior `{}` is declared twice", b.name.value));
                self.errors.push(d);
            }
        }
        let mut seen = BTreeSet::new();
        for p in &tree.params {
            if !seen.insert(p.name.as_str()) {
                let d = self.error(codes::DUPLICATE_NAME, p.name.span, format!("param `{}` is set twice", p.name.value));
                self.errors.push(d);
            }
        }
    }
}

/// Nearest candidate within edit distance 2, if any.
pub(crate) fn closest<'c>(word: &str, candidates: &[&'c str]) -> Option<&'c str> {
    candidates
        .iter()
        .map(|c| (edit_distance(word, c), *c))
        .filter(|(d, _)| *d <= 2 && *d > 0)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = alloc::vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != *cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

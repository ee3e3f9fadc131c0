//! Syntax tree of the supported dialect. Spans ride along on identifiers and
//! string literals but never take part in equality.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::span::{Ident, Span, Spanned};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScenarioTree {
    pub params: Vec<ParamDecl>,
    pub model_import: Option<Spanned<String>>,
    pub behaviors: Vec<BehaviorDecl>,
    pub objects: Vec<ObjectDecl>,
    pub requirements: Vec<Expr>,
    pub terminations: Vec<Termination>,
}

impl ScenarioTree {
    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name.as_str() == name)
    }

    pub fn object(&self, name: &str) -> Option<&ObjectDecl> {
        self.objects.iter().find(|o| o.name.as_str() == name)
    }

    pub fn behavior(&self, name: &str) -> Option<&BehaviorDecl> {
        self.behaviors.iter().find(|b| b.name.as_str() == name)
    }

    pub fn ego(&self) -> Option<&ObjectDecl> {
        self.object(EGO)
    }
}

pub const EGO: &str = "ego";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: Ident,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorDecl {
    pub name: Ident,
    pub params: Vec<FormalParam>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalParam {
    pub name: Ident,
    pub default: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectDecl {
    pub name: Ident,
    pub class: Ident,
    pub specifiers: Vec<Specifier>,
    pub properties: Vec<Property>,
}

impl ObjectDecl {
    /// The `with behavior ...` property, if any.
    pub fn behavior(&self) -> Option<&Expr> {
        self.properties.iter().find(|p| p.name.as_str() == "behavior").map(|p| &p.value)
    }

    pub fn specifier(&self, kind: SpecifierKind) -> Option<&Specifier> {
        self.specifiers.iter().find(|s| s.kind.value == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: Ident,
    pub value: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecifierKind {
    At,
    OffsetBy,
    AheadOf,
    Behind,
    LeftOf,
    RightOf,
    Facing,
    FacingToward,
    On,
}

impl SpecifierKind {
    pub const ALL: [SpecifierKind; 9] = [
        SpecifierKind::At,
        SpecifierKind::OffsetBy,
        SpecifierKind::AheadOf,
        SpecifierKind::Behind,
        SpecifierKind::LeftOf,
        SpecifierKind::RightOf,
        SpecifierKind::Facing,
        SpecifierKind::FacingToward,
        SpecifierKind::On,
    ];

    /// Identifier used in catalogs.
    pub fn as_str(self) -> &'static str {
        match self {
            SpecifierKind::At => "at",
            SpecifierKind::OffsetBy => "offset_by",
            SpecifierKind::AheadOf => "ahead_of",
            SpecifierKind::Behind => "behind",
            SpecifierKind::LeftOf => "left_of",
            SpecifierKind::RightOf => "right_of",
            SpecifierKind::Facing => "facing",
            SpecifierKind::FacingToward => "facing_toward",
            SpecifierKind::On => "on",
        }
    }

    /// Surface keywords as written in scripts.
    pub fn keyword(self) -> &'static str {
        match self {
            SpecifierKind::At => "at",
            SpecifierKind::OffsetBy => "offset by",
            SpecifierKind::AheadOf => "ahead of",
            SpecifierKind::Behind => "behind",
            SpecifierKind::LeftOf => "left of",
            SpecifierKind::RightOf => "right of",
            SpecifierKind::Facing => "facing",
            SpecifierKind::FacingToward => "facing toward",
            SpecifierKind::On => "on",
        }
    }

    /// Relative specifiers that accept a trailing `by <distance>`.
    pub fn takes_distance(self) -> bool {
        matches!(
            self,
            SpecifierKind::AheadOf | SpecifierKind::Behind | SpecifierKind::LeftOf | SpecifierKind::RightOf
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Specifier {
    pub kind: Spanned<SpecifierKind>,
    pub target: Expr,
    pub distance: Option<Expr>,
}

impl Specifier {
    /// The object name this specifier positions relative to, when the
    /// target is a bare name.
    pub fn anchor(&self) -> Option<&Ident> {
        match &self.target {
            Expr::Name(n) if self.kind.value != SpecifierKind::Facing => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Steps,
}

impl TimeUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "seconds",
            TimeUnit::Steps => "steps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    When(Expr),
    After { amount: Expr, unit: TimeUnit },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DoModifier {
    For { amount: Expr, unit: TimeUnit },
    Until(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Do { call: Expr, modifier: Option<DoModifier> },
    Take(Vec<Expr>),
    Wait,
    Terminate,
    Pass,
    Assign { target: Ident, value: Expr },
    While { cond: Expr, body: Vec<Stmt> },
    If { branches: Vec<(Expr, Vec<Stmt>)>, orelse: Option<Vec<Stmt>> },
    Try { body: Vec<Stmt>, handlers: Vec<Interrupt> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interrupt {
    pub cond: Expr,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Vec,
}

impl BinOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Vec => "@",
        }
    }

    /// Binding power; higher binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
            BinOp::Vec => 7,
        }
    }
}

pub const PREC_NOT: u8 = 3;
pub const PREC_ADDITIVE: u8 = 5;
pub const PREC_UNARY: u8 = 8;
pub const PREC_POSTFIX: u8 = 9;
pub const PREC_ATOM: u8 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    pub name: Option<Ident>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// Numeric literal kept as its source lexeme.
    Number(String),
    Str(Spanned<String>),
    Bool(bool),
    None,
    Name(Ident),
    Attr { base: Box<Expr>, attr: Ident },
    Call { callee: Box<Expr>, args: Vec<Arg> },
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Degrees(Box<Expr>),
    Distance { from: Option<Box<Expr>>, to: Box<Expr> },
}

impl Expr {
    pub fn name(name: &str) -> Expr {
        Expr::Name(Spanned::bare(name.into()))
    }

    pub fn number(lexeme: &str) -> Expr {
        Expr::Number(lexeme.into())
    }

    pub fn string(value: &str) -> Expr {
        Expr::Str(Spanned::bare(value.into()))
    }

    pub fn call(callee: &str, args: Vec<Expr>) -> Expr {
        Expr::Call {
            callee: Box::new(Expr::name(callee)),
            args: args.into_iter().map(|value| Arg { name: None, value }).collect(),
        }
    }

    /// For a call whose callee is a plain name, that name.
    pub fn callee_name(&self) -> Option<&Ident> {
        match self {
            Expr::Call { callee, .. } => match callee.as_ref() {
                Expr::Name(n) => Some(n),
                _ => None,
            },
            Expr::Name(n) => Some(n),
            _ => None,
        }
    }

    pub fn arg_count(&self) -> usize {
        match self {
            Expr::Call { args, .. } => args.len(),
            _ => 0,
        }
    }

    pub fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Unary { op: UnaryOp::Not, .. } => PREC_NOT,
            Expr::Unary { op: UnaryOp::Neg, .. } => PREC_UNARY,
            Expr::Attr { .. } | Expr::Call { .. } | Expr::Degrees(_) => PREC_POSTFIX,
            _ => PREC_ATOM,
        }
    }

    /// Depth-first visit of this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Attr { base, .. } => base.walk(f),
            Expr::Call { callee, args } => {
                callee.walk(f);
                for a in args {
                    a.value.walk(f);
                }
            }
            Expr::Tuple(items) | Expr::List(items) => {
                for e in items {
                    e.walk(f);
                }
            }
            Expr::Unary { operand, .. } => operand.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Degrees(e) => e.walk(f),
            Expr::Distance { from, to } => {
                if let Some(from) = from {
                    from.walk(f);
                }
                to.walk(f);
            }
            Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) | Expr::None | Expr::Name(_) => {}
        }
    }

    /// Whether any bare name in this expression equals `name`.
    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let Expr::Name(n) = e {
                found |= n.as_str() == name;
            }
        });
        found
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            Expr::Str(s) => Some(s.span),
            Expr::Name(n) => Some(n.span),
            Expr::Call { callee, .. } => callee.span(),
            Expr::Attr { base, attr } => base.span().map(|s| s.to(attr.span)),
            _ => None,
        }
    }
}

impl Stmt {
    /// Depth-first visit of this statement and nested statements.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        let blocks: Vec<&'a Vec<Stmt>> = match self {
            Stmt::While { body, .. } => alloc::vec![body],
            Stmt::If { branches, orelse } => {
                let mut v: Vec<&Vec<Stmt>> = branches.iter().map(|(_, b)| b).collect();
                v.extend(orelse.iter());
                v
            }
            Stmt::Try { body, handlers } => {
                let mut v = alloc::vec![body];
                v.extend(handlers.iter().map(|h| &h.body));
                v
            }
            _ => Vec::new(),
        };
        for block in blocks {
            for s in block {
                s.walk(f);
            }
        }
    }
}

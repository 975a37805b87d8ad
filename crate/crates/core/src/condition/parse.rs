use super::{CompareOp, Expr, Literal, Operand};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Path(String),
    Number(f64),
    Str(String),
    True,
    False,
    And,
    Or,
    Not,
    Exists,
    Cmp(CompareOp),
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Path(p) => format!("path `{p}`"),
            Token::Number(n) => format!("number {n}"),
            Token::Str(_) => "string literal".into(),
            Token::True | Token::False => "boolean literal".into(),
            Token::And => "`and`".into(),
            Token::Or => "`or`".into(),
            Token::Not => "`not`".into(),
            Token::Exists => "`exists`".into(),
            Token::Cmp(op) => format!("`{}`", op.symbol()),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, SyntaxError> {
    Err(SyntaxError {
        offset,
        message: message.into(),
    })
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let token = match b {
            b'(' => {
                i += 1;
                Token::LParen
            }
            b')' => {
                i += 1;
                Token::RParen
            }
            b'=' | b'!' | b'<' | b'>' => {
                let next = bytes.get(i + 1).copied();
                let (op, len) = match (b, next) {
                    (b'=', Some(b'=')) => (CompareOp::Eq, 2),
                    (b'!', Some(b'=')) => (CompareOp::Ne, 2),
                    (b'<', Some(b'=')) => (CompareOp::Le, 2),
                    (b'>', Some(b'=')) => (CompareOp::Ge, 2),
                    (b'<', _) => (CompareOp::Lt, 1),
                    (b'>', _) => (CompareOp::Gt, 1),
                    _ => return err(start, format!("unexpected character `{}`", b as char)),
                };
                i += len;
                Token::Cmp(op)
            }
            b'\'' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(c) = text[i..].chars().next() else {
                        return err(start, "unterminated string literal");
                    };
                    i += c.len_utf8();
                    match c {
                        '\'' => break,
                        '\\' => match text[i..].chars().next() {
                            Some(e @ ('\'' | '\\')) => {
                                s.push(e);
                                i += 1;
                            }
                            _ => return err(i - 1, "invalid escape in string literal"),
                        },
                        c => s.push(c),
                    }
                }
                Token::Str(s)
            }
            b'-' | b'0'..=b'9' => {
                if b == b'-' {
                    i += 1;
                }
                let digits_start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i == digits_start {
                    return err(start, "expected digits after `-`");
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let frac = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac {
                        return err(i, "expected digits after decimal point");
                    }
                }
                if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
                    i += 1;
                    if i < bytes.len() && matches!(bytes[i], b'+' | b'-') {
                        i += 1;
                    }
                    let exp = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == exp {
                        return err(i, "expected exponent digits");
                    }
                }
                if i < bytes.len() && is_ident_char(bytes[i]) {
                    return err(i, "unexpected character after number");
                }
                match text[start..i].parse::<f64>() {
                    Ok(n) if n.is_finite() => Token::Number(n),
                    _ => return err(start, "number out of range"),
                }
            }
            b if is_ident_start(b) => {
                loop {
                    while i < bytes.len() && is_ident_char(bytes[i]) {
                        i += 1;
                    }
                    if i + 1 < bytes.len() && bytes[i] == b'.' && is_ident_start(bytes[i + 1]) {
                        i += 1;
                    } else {
                        break;
                    }
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    return err(i, "expected identifier after `.`");
                }
                match &text[start..i] {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "not" => Token::Not,
                    "exists" => Token::Exists,
                    "true" => Token::True,
                    "false" => Token::False,
                    path => Token::Path(path.to_owned()),
                }
            }
            _ => {
                let c = text[i..].chars().next().unwrap_or('?');
                return err(start, format!("unexpected character `{c}`"));
            }
        };
        tokens.push((token, start));
    }
    tokens.push((Token::End, text.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            err(
                self.offset(),
                format!(
                    "expected {}, found {}",
                    want.describe(),
                    self.peek().describe()
                ),
            )
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.and_chain()?;
        while *self.peek() == Token::Or {
            self.bump();
            let right = self.and_chain()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_chain(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.unary()?;
        while *self.peek() == Token::And {
            self.bump();
            let right = self.unary()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if *self.peek() == Token::Not {
            self.bump();
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Token::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Token::Exists => {
                self.bump();
                self.expect(Token::LParen)?;
                let (tok, at) = self.bump();
                let Token::Path(path) = tok else {
                    return err(at, format!("expected path, found {}", tok.describe()));
                };
                self.expect(Token::RParen)?;
                Ok(Expr::Exists(path))
            }
            _ => {
                let left_at = self.offset();
                let left = self.operand()?;
                let (tok, at) = self.bump();
                let Token::Cmp(op) = tok else {
                    return err(
                        at,
                        format!("expected comparison operator, found {}", tok.describe()),
                    );
                };
                let right = self.operand()?;
                if matches!((&left, &right), (Operand::Literal(_), Operand::Literal(_))) {
                    return err(left_at, "comparison needs at least one context path");
                }
                Ok(Expr::Compare { left, op, right })
            }
        }
    }

    fn operand(&mut self) -> Result<Operand, SyntaxError> {
        let (tok, at) = self.bump();
        Ok(match tok {
            Token::Path(p) => Operand::Path(p),
            Token::Number(n) => Operand::Literal(Literal::Number(n)),
            Token::Str(s) => Operand::Literal(Literal::String(s)),
            Token::True => Operand::Literal(Literal::Bool(true)),
            Token::False => Operand::Literal(Literal::Bool(false)),
            other => return err(at, format!("expected operand, found {}", other.describe())),
        })
    }
}

pub(super) fn parse(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Token::End {
        return err(p.offset(), format!("unexpected {}", p.peek().describe()));
    }
    Ok(e)
}

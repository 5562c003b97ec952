//! Parsers for the three descriptor responses.
//!
//! LLM output asks for Python literals but drifts: markdown fences, either
//! quote style (including typographic quotes), a leading `Answer:` style
//! prefix and trailing prose all occur. The parsers scan for the first
//! well-formed literal of the expected shape and ignore everything around
//! it. Parsing is a pure function of the response text.

use std::sync::LazyLock;

use regex::Regex;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("response is empty")]
    EmptyResponse,
    #[error("no list of strings found in response")]
    NoList,
    #[error("expected exactly 3 steps, found {0}")]
    StepCount(usize),
    #[error("step {0} is empty")]
    EmptyStep(usize),
    #[error("description is empty after stripping")]
    EmptyDescription,
    #[error("no dictionary with 'context' and 'objects' keys found")]
    NoContextDict,
    #[error("context string is empty")]
    EmptyContext,
    #[error("object list is empty or contains an empty entry")]
    EmptyObjects,
}

impl ParseError {
    /// Stable identifier used by fixture corpora and machine-readable output.
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::EmptyResponse => "empty_response",
            ParseError::NoList => "no_list",
            ParseError::StepCount(_) => "step_count",
            ParseError::EmptyStep(_) => "empty_step",
            ParseError::EmptyDescription => "empty_description",
            ParseError::NoContextDict => "no_context_dict",
            ParseError::EmptyContext => "empty_context",
            ParseError::EmptyObjects => "empty_objects",
        }
    }
}

/// Parses a decomposition response into exactly three steps.
pub fn parse_decomposition(response: &str) -> Result<Vec<String>, ParseError> {
    let body = strip_fences(response);
    if body.trim().is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    let steps = first_string_list(&body).ok_or(ParseError::NoList)?;
    if steps.len() != 3 {
        return Err(ParseError::StepCount(steps.len()));
    }
    let steps: Vec<String> = steps.into_iter().map(|s| s.trim().to_string()).collect();
    if let Some(i) = steps.iter().position(String::is_empty) {
        return Err(ParseError::EmptyStep(i));
    }
    Ok(steps)
}

static DESCRIPTION_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:action\s+description|description|answer|response|output|result)\s*[:=]\s*")
        .unwrap()
});

static LABEL_ECHO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)^action\s+label\s*:.*?\bdescription\s*:\s*").unwrap());

/// Parses a description response into a single string.
pub fn parse_description(response: &str) -> Result<String, ParseError> {
    let body = strip_fences(response);
    let mut text = body.trim().to_string();
    if text.is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    if let Some(m) = LABEL_ECHO.find(&text) {
        text = text[m.end()..].trim().to_string();
    }
    loop {
        let stripped = DESCRIPTION_PREFIX.replace(&text, "").trim().to_string();
        if stripped == text {
            break;
        }
        text = stripped;
    }
    if let Some(inner) = strip_triple_quotes(&text) {
        text = inner.trim().to_string();
    }
    if text.starts_with(|c: char| is_open_quote(c)) {
        let mut p = Parser::new(&text);
        if let Ok(s) = p.parse_string() {
            let rest: String = p.rest();
            if rest.trim().trim_matches(|c: char| c.is_ascii_punctuation()).is_empty() {
                text = s.trim().to_string();
            }
        } else if let Some(inner) = strip_matching_quotes(&text) {
            text = inner.trim().to_string();
        }
    }
    if text.is_empty() {
        return Err(ParseError::EmptyDescription);
    }
    Ok(text)
}

/// Parses a context response into the context string and the object list.
pub fn parse_context(response: &str) -> Result<(String, Vec<String>), ParseError> {
    let body = strip_fences(response);
    if body.trim().is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    let chars: Vec<char> = body.chars().collect();
    let mut found = None;
    for (i, &c) in chars.iter().enumerate() {
        if c != '{' {
            continue;
        }
        let mut p = Parser::from_chars(&chars[i..]);
        if let Ok(Literal::Dict(entries)) = p.parse_value() {
            if let Some(hit) = context_fields(&entries) {
                found = Some(hit);
                break;
            }
        }
    }
    if found.is_none() {
        // Brace-less `'context': ..., 'objects': [...]`, as in the prompt's own example.
        let lower: Vec<char> = chars.iter().map(|c| c.to_ascii_lowercase()).collect();
        let needle: Vec<char> = "context".chars().collect();
        let mut start = 0;
        while let Some(pos) = find_sub(&lower[start..], &needle).map(|p| p + start) {
            let key_start = if pos > 0 && is_open_quote(chars[pos - 1]) { pos - 1 } else { pos };
            let mut p = Parser::from_chars(&chars[key_start..]);
            if let Ok(entries) = p.parse_dict_body(None) {
                if let Some(hit) = context_fields(&entries) {
                    found = Some(hit);
                    break;
                }
            }
            start = pos + 1;
        }
    }
    let (context, objects) = found.ok_or(ParseError::NoContextDict)?;
    let context = context.trim().to_string();
    if context.is_empty() {
        return Err(ParseError::EmptyContext);
    }
    let objects: Vec<String> = objects.into_iter().map(|o| o.trim().to_string()).collect();
    if objects.is_empty() || objects.iter().any(String::is_empty) {
        return Err(ParseError::EmptyObjects);
    }
    Ok((context, objects))
}

fn context_fields(entries: &[(String, Literal)]) -> Option<(String, Vec<String>)> {
    let lookup = |name: &str| {
        entries
            .iter()
            .find(|(k, _)| k.trim().eq_ignore_ascii_case(name))
            .map(|(_, v)| v)
    };
    let context = match lookup("context")? {
        Literal::Str(s) => s.clone(),
        _ => return None,
    };
    let objects = match lookup("objects")? {
        Literal::Str(s) => vec![s.clone()],
        Literal::List(items) => items
            .iter()
            .map(|i| match i {
                Literal::Str(s) => Some(s.clone()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?,
        Literal::Dict(_) => return None,
    };
    Some((context, objects))
}

/// Returns the content of the first fenced block, or the input unchanged when
/// there is no fence. A language tag on the opening fence line is dropped.
pub fn strip_fences(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.to_string();
    };
    let mut inner = &text[open + 3..];
    let first_line_end = inner.find('\n').unwrap_or(inner.len());
    let tag = inner[..first_line_end].trim();
    if !tag.is_empty() && tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        inner = &inner[first_line_end..];
    }
    match inner.find("```") {
        Some(close) => inner[..close].to_string(),
        None => inner.to_string(),
    }
}

fn strip_triple_quotes(text: &str) -> Option<&str> {
    for q in ["\"\"\"", "'''"] {
        if text.len() >= 6 && text.starts_with(q) && text.ends_with(q) {
            return Some(&text[3..text.len() - 3]);
        }
    }
    None
}

fn strip_matching_quotes(text: &str) -> Option<&str> {
    let first = text.chars().next()?;
    let last = text.chars().last()?;
    if text.chars().count() >= 2 && is_open_quote(first) && closes(first, last) {
        Some(&text[first.len_utf8()..text.len() - last.len_utf8()])
    } else {
        None
    }
}

fn find_sub(hay: &[char], needle: &[char]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn first_string_list(body: &str) -> Option<Vec<String>> {
    let chars: Vec<char> = body.chars().collect();
    chars.iter().enumerate().filter(|(_, &c)| c == '[').find_map(|(i, _)| {
        let mut p = Parser::from_chars(&chars[i..]);
        match p.parse_value() {
            Ok(Literal::List(items)) => items
                .into_iter()
                .map(|item| match item {
                    Literal::Str(s) => Some(s),
                    _ => None,
                })
                .collect(),
            _ => None,
        }
    })
}

fn is_single_quote(c: char) -> bool {
    matches!(c, '\'' | '\u{2018}' | '\u{2019}')
}

fn is_open_quote(c: char) -> bool {
    is_single_quote(c) || matches!(c, '"' | '\u{201C}' | '\u{201D}')
}

fn closes(open: char, close: char) -> bool {
    match open {
        '"' => close == '"',
        '\u{201C}' | '\u{201D}' => matches!(close, '\u{201D}' | '\u{201C}' | '"'),
        _ => is_single_quote(close),
    }
}

/// Subset of Python literals that descriptor responses use.
#[derive(Debug, Clone, PartialEq)]
enum Literal {
    Str(String),
    List(Vec<Literal>),
    Dict(Vec<(String, Literal)>),
}

#[derive(Debug)]
struct Malformed;

struct Parser<'a> {
    chars: std::borrow::Cow<'a, [char]>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &str) -> Parser<'static> {
        Parser {
            chars: std::borrow::Cow::Owned(text.chars().collect()),
            pos: 0,
        }
    }

    fn from_chars(chars: &'a [char]) -> Self {
        Parser {
            chars: std::borrow::Cow::Borrowed(chars),
            pos: 0,
        }
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn next_non_ws(&self, from: usize) -> Option<char> {
        self.chars[from..].iter().copied().find(|c| !c.is_whitespace())
    }

    fn parse_value(&mut self) -> Result<Literal, Malformed> {
        self.skip_ws();
        match self.peek() {
            Some('[') => self.parse_list(),
            Some('{') => {
                self.pos += 1;
                self.parse_dict_body(Some('}')).map(Literal::Dict)
            }
            Some(c) if is_open_quote(c) => self.parse_string().map(Literal::Str),
            _ => Err(Malformed),
        }
    }

    fn parse_list(&mut self) -> Result<Literal, Malformed> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(']') => {
                    self.pos += 1;
                    return Ok(Literal::List(items));
                }
                None => return Err(Malformed),
                _ => {}
            }
            items.push(self.parse_value()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {}
                _ => return Err(Malformed),
            }
        }
    }

    /// Parses `key: value` pairs up to `terminator` (consumed), or up to the
    /// first position that does not continue the pair sequence when
    /// `terminator` is `None`.
    fn parse_dict_body(&mut self, terminator: Option<char>) -> Result<Vec<(String, Literal)>, Malformed> {
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            if terminator.is_some() && self.peek() == terminator {
                self.pos += 1;
                return Ok(entries);
            }
            let pair_start = self.pos;
            let pair = self.parse_pair();
            let (key, value) = match pair {
                Ok(kv) => kv,
                Err(_) if terminator.is_none() && !entries.is_empty() => {
                    self.pos = pair_start;
                    return Ok(entries);
                }
                Err(e) => return Err(e),
            };
            entries.push((key, value));
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                c if terminator.is_some() && c == terminator => {}
                _ if terminator.is_none() => return Ok(entries),
                _ => return Err(Malformed),
            }
        }
    }

    fn parse_pair(&mut self) -> Result<(String, Literal), Malformed> {
        let key = self.parse_key()?;
        self.skip_ws();
        if self.peek() != Some(':') {
            return Err(Malformed);
        }
        self.pos += 1;
        let value = self.parse_value()?;
        Ok((key, value))
    }

    fn parse_key(&mut self) -> Result<String, Malformed> {
        match self.peek() {
            Some(c) if is_open_quote(c) => self.parse_string(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                Ok(self.chars[start..self.pos].iter().collect())
            }
            _ => Err(Malformed),
        }
    }

    /// Double-quoted strings close at the first unescaped matching quote.
    /// Single-quoted strings (ASCII or typographic) close only at a quote
    /// followed by a structural character or the end of input, so
    /// apostrophes inside unescaped LLM text survive.
    fn parse_string(&mut self) -> Result<String, Malformed> {
        let open = self.peek().ok_or(Malformed)?;
        self.pos += 1;
        let mut out = String::new();
        while let Some(c) = self.peek() {
            self.pos += 1;
            if c == '\\' {
                let esc = self.peek().ok_or(Malformed)?;
                self.pos += 1;
                match esc {
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    '\\' | '\'' | '"' => out.push(esc),
                    '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' => out.push(esc),
                    other => {
                        out.push('\\');
                        out.push(other);
                    }
                }
                continue;
            }
            if closes(open, c) {
                if is_single_quote(open) {
                    match self.next_non_ws(self.pos) {
                        None | Some(',' | ']' | '}' | ':' | ')' | '.' | ';') => return Ok(out),
                        _ => {}
                    }
                } else {
                    return Ok(out);
                }
            }
            if c == '\n' && is_single_quote(open) {
                return Err(Malformed);
            }
            out.push(c);
        }
        Err(Malformed)
    }
}

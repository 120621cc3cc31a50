//! Strict recursive-descent parser for the descriptor wire format.
//!
//! The lexer only understands tags and inter-tag whitespace; the grammar has
//! no text content, comments, processing instructions, or namespaces. Every
//! diagnostic carries the line it was raised on plus the enclosing element.

use super::{
    is_identifier, is_node_id, DescriptorError, OperationSignature, ParamSpec, ParamType,
    ServiceDescriptor,
};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
struct Tag {
    line: usize,
    name: String,
    attrs: Vec<(String, String)>,
    closing: bool,
    self_closing: bool,
}

fn syntax(line: usize, msg: impl Into<String>) -> DescriptorError {
    DescriptorError::Syntax { line, msg: msg.into() }
}

fn schema(line: usize, element: &str, msg: impl Into<String>) -> DescriptorError {
    DescriptorError::Schema { line, element: element.to_string(), msg: msg.into() }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn read_name(&mut self) -> String {
        let mut s = String::new();
        while matches!(self.chars.peek(), Some(c) if c.is_ascii_alphanumeric() || *c == '_') {
            s.push(self.bump().unwrap());
        }
        s
    }

    fn next_tag(&mut self) -> Result<Option<Tag>, DescriptorError> {
        self.skip_ws();
        let line = self.line;
        match self.bump() {
            None => return Ok(None),
            Some('<') => {}
            Some(c) => return Err(syntax(line, format!("unexpected character `{c}` outside tags"))),
        }
        let closing = if self.chars.peek() == Some(&'/') {
            self.bump();
            true
        } else {
            false
        };
        let name = self.read_name();
        if name.is_empty() {
            return Err(syntax(self.line, "expected element name after `<`"));
        }
        let mut attrs = Vec::new();
        loop {
            self.skip_ws();
            match self.chars.peek() {
                Some('>') => {
                    self.bump();
                    return Ok(Some(Tag { line, name, attrs, closing, self_closing: false }));
                }
                Some('/') => {
                    self.bump();
                    if self.bump() != Some('>') {
                        return Err(syntax(self.line, "expected `>` after `/`"));
                    }
                    if closing {
                        return Err(syntax(line, "closing tag cannot be self-closing"));
                    }
                    return Ok(Some(Tag { line, name, attrs, closing, self_closing: true }));
                }
                Some(c) if c.is_ascii_alphabetic() => {
                    if closing {
                        return Err(syntax(self.line, "closing tag cannot carry attributes"));
                    }
                    let key = self.read_name();
                    if self.bump() != Some('=') {
                        return Err(syntax(self.line, format!("expected `=` after attribute `{key}`")));
                    }
                    if self.bump() != Some('"') {
                        return Err(syntax(self.line, format!("expected `\"` to open value of `{key}`")));
                    }
                    let mut value = String::new();
                    loop {
                        match self.bump() {
                            Some('"') => break,
                            Some('<') | Some('\n') | None => {
                                return Err(syntax(self.line, format!("unterminated value of `{key}`")))
                            }
                            Some(c) => value.push(c),
                        }
                    }
                    attrs.push((key, value));
                }
                Some(c) => return Err(syntax(self.line, format!("unexpected character `{c}` in tag"))),
                None => return Err(syntax(self.line, "unexpected end of input inside tag")),
            }
        }
    }
}

struct Cursor {
    tags: Vec<Tag>,
    pos: usize,
    last_line: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Tag> {
        self.tags.get(self.pos)
    }

    fn next(&mut self) -> Option<Tag> {
        let tag = self.tags.get(self.pos).cloned();
        if let Some(t) = &tag {
            self.last_line = t.line;
            self.pos += 1;
        }
        tag
    }

    fn expect_open(&mut self, element: &str) -> Result<Tag, DescriptorError> {
        match self.next() {
            Some(t) if !t.closing && t.name == element => Ok(t),
            Some(t) if !t.closing => Err(schema(
                t.line,
                element,
                format!("expected <{element}>, found <{}>", t.name),
            )),
            Some(t) => Err(schema(
                t.line,
                element,
                format!("expected <{element}>, found </{}>", t.name),
            )),
            None => Err(schema(self.last_line, element, format!("expected <{element}>, found end of input"))),
        }
    }

    fn expect_close(&mut self, element: &str) -> Result<(), DescriptorError> {
        match self.next() {
            Some(t) if t.closing && t.name == element => Ok(()),
            Some(t) => Err(schema(
                t.line,
                element,
                format!("expected </{element}>, found `{}`", display_tag(&t)),
            )),
            None => Err(schema(self.last_line, element, format!("expected </{element}>, found end of input"))),
        }
    }
}

fn display_tag(t: &Tag) -> String {
    if t.closing {
        format!("</{}>", t.name)
    } else {
        format!("<{}>", t.name)
    }
}

/// Returns the single attribute value of `tag`, enforcing the exact attribute set.
fn sole_attr(tag: &Tag, key: &str) -> Result<String, DescriptorError> {
    if tag.attrs.len() != 1 || tag.attrs[0].0 != key {
        return Err(schema(
            tag.line,
            &tag.name,
            format!("element requires exactly one `{key}` attribute"),
        ));
    }
    Ok(tag.attrs[0].1.clone())
}

fn attr_pair(tag: &Tag, a: &str, b: &str) -> Result<(String, String), DescriptorError> {
    if tag.attrs.len() != 2 {
        return Err(schema(
            tag.line,
            &tag.name,
            format!("element requires exactly the `{a}` and `{b}` attributes"),
        ));
    }
    let get = |key: &str| {
        tag.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| schema(tag.line, &tag.name, format!("missing `{key}` attribute")))
    };
    Ok((get(a)?, get(b)?))
}

fn ident_attr(tag: &Tag, key: &str) -> Result<String, DescriptorError> {
    let v = sole_attr(tag, key)?;
    if !is_identifier(&v) {
        return Err(schema(tag.line, &tag.name, format!("`{v}` is not a valid identifier")));
    }
    Ok(v)
}

struct Message {
    line: usize,
    parts: Vec<ParamSpec>,
}

fn parse_message(cur: &mut Cursor, open: &Tag) -> Result<(String, Message), DescriptorError> {
    let name = ident_attr(open, "name")?;
    let mut parts = Vec::new();
    if !open.self_closing {
        loop {
            match cur.peek() {
                Some(t) if !t.closing && t.name == "part" => {
                    let t = cur.next().unwrap();
                    if !t.self_closing {
                        return Err(schema(t.line, "part", "part must be self-closing"));
                    }
                    let (pname, ptoken) = attr_pair(&t, "name", "type")?;
                    if !is_identifier(&pname) {
                        return Err(schema(t.line, "part", format!("`{pname}` is not a valid identifier")));
                    }
                    let ptype = ParamType::from_token(&ptoken).ok_or_else(|| {
                        schema(t.line, "part", format!("unknown type token `{ptoken}`"))
                    })?;
                    if parts.iter().any(|p: &ParamSpec| p.name == pname) {
                        return Err(schema(t.line, "message", format!("duplicate part `{pname}`")));
                    }
                    parts.push(ParamSpec { name: pname, ptype });
                }
                _ => break,
            }
        }
        cur.expect_close("message")?;
    }
    Ok((name, Message { line: open.line, parts }))
}

struct RawOperation {
    line: usize,
    name: String,
    input_message: String,
    output_message: String,
}

fn parse_operation(cur: &mut Cursor, open: &Tag) -> Result<RawOperation, DescriptorError> {
    let name = ident_attr(open, "name")?;
    if open.self_closing {
        return Err(schema(open.line, "operation", "operation requires <input> and <output> children"));
    }
    let input = cur.expect_open("input")?;
    if !input.self_closing {
        return Err(schema(input.line, "input", "input must be self-closing"));
    }
    let input_message = sole_attr(&input, "message")?;
    let output = cur.expect_open("output")?;
    if !output.self_closing {
        return Err(schema(output.line, "output", "output must be self-closing"));
    }
    let output_message = sole_attr(&output, "message")?;
    cur.expect_close("operation")?;
    Ok(RawOperation { line: open.line, name, input_message, output_message })
}

/// Parses a descriptor document, rejecting anything outside the grammar.
pub fn parse_descriptor(text: &str) -> Result<ServiceDescriptor, DescriptorError> {
    let mut lexer = Lexer::new(text);
    let mut tags = Vec::new();
    while let Some(tag) = lexer.next_tag()? {
        tags.push(tag);
    }
    let mut cur = Cursor { tags, pos: 0, last_line: 1 };

    let definitions = cur.expect_open("definitions")?;
    if definitions.self_closing {
        return Err(schema(definitions.line, "definitions", "missing <portType> and <service>"));
    }
    let service_name = ident_attr(&definitions, "name")?;

    let mut messages: BTreeMap<String, Message> = BTreeMap::new();
    while matches!(cur.peek(), Some(t) if !t.closing && t.name == "message") {
        let open = cur.next().unwrap();
        let (name, msg) = parse_message(&mut cur, &open)?;
        if messages.contains_key(&name) {
            return Err(schema(msg.line, "message", format!("duplicate message `{name}`")));
        }
        messages.insert(name, msg);
    }

    let port_type = cur.expect_open("portType")?;
    let port_type_name = ident_attr(&port_type, "name")?;
    let expected_port = format!("{service_name}Port");
    if port_type_name != expected_port {
        return Err(schema(
            port_type.line,
            "portType",
            format!("portType must be named `{expected_port}`, found `{port_type_name}`"),
        ));
    }
    let mut raw_ops = Vec::new();
    if !port_type.self_closing {
        while matches!(cur.peek(), Some(t) if !t.closing && t.name == "operation") {
            let open = cur.next().unwrap();
            raw_ops.push(parse_operation(&mut cur, &open)?);
        }
        cur.expect_close("portType")?;
    }

    let service = cur.expect_open("service")?;
    if service.self_closing {
        return Err(schema(service.line, "service", "service requires a <port> child"));
    }
    let svc_name = ident_attr(&service, "name")?;
    if svc_name != service_name {
        return Err(schema(
            service.line,
            "service",
            format!("service name `{svc_name}` does not match definitions name `{service_name}`"),
        ));
    }
    let port = cur.expect_open("port")?;
    if port.self_closing {
        return Err(schema(port.line, "port", "port requires an <address> child"));
    }
    let port_name = sole_attr(&port, "name")?;
    if port_name != expected_port {
        return Err(schema(
            port.line,
            "port",
            format!("port must reference `{expected_port}`, found `{port_name}`"),
        ));
    }
    let address = cur.expect_open("address")?;
    if !address.self_closing {
        return Err(schema(address.line, "address", "address must be self-closing"));
    }
    let location = sole_attr(&address, "location")?;
    match location.strip_prefix("node://") {
        Some(id) if is_node_id(id) => {}
        _ => {
            return Err(schema(
                address.line,
                "address",
                format!("location `{location}` is not of the form node://<id>"),
            ))
        }
    }
    cur.expect_close("port")?;
    cur.expect_close("service")?;
    cur.expect_close("definitions")?;
    if let Some(t) = cur.peek() {
        return Err(schema(t.line, "definitions", format!("trailing `{}` after document end", display_tag(t))));
    }

    let mut operations = Vec::new();
    for raw in raw_ops {
        let inputs = messages
            .get(&raw.input_message)
            .ok_or_else(|| {
                schema(raw.line, "operation", format!("input references undefined message `{}`", raw.input_message))
            })?
            .parts
            .clone();
        let out_msg = messages.get(&raw.output_message).ok_or_else(|| {
            schema(raw.line, "operation", format!("output references undefined message `{}`", raw.output_message))
        })?;
        if out_msg.parts.is_empty() {
            return Err(schema(
                raw.line,
                "operation",
                format!("response message `{}` must declare at least one part", raw.output_message),
            ));
        }
        if operations.iter().any(|op: &OperationSignature| op.name == raw.name) {
            return Err(schema(raw.line, "operation", format!("duplicate operation `{}`", raw.name)));
        }
        operations.push(OperationSignature {
            name: raw.name,
            inputs,
            outputs: out_msg.parts.clone(),
        });
    }

    Ok(ServiceDescriptor {
        service_name,
        endpoint: location,
        operations,
    })
}

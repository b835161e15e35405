use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::{Fault, Value, XmlRpcError};

#[derive(Debug, Clone, PartialEq)]
pub struct MethodCall {
    pub method: String,
    pub params: Vec<Value>,
}

fn escape(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

fn write_value(v: &Value, out: &mut String) {
    out.push_str("<value>");
    match v {
        Value::Int(i) => {
            let _ = write!(out, "<i4>{i}</i4>");
        }
        Value::Bool(b) => {
            let _ = write!(out, "<boolean>{}</boolean>", u8::from(*b));
        }
        Value::String(s) => {
            out.push_str("<string>");
            escape(s, out);
            out.push_str("</string>");
        }
        Value::Double(d) => {
            let _ = write!(out, "<double>{d:?}</double>");
        }
        Value::Array(items) => {
            out.push_str("<array><data>");
            for item in items {
                write_value(item, out);
            }
            out.push_str("</data></array>");
        }
    }
    out.push_str("</value>");
}

fn write_params(params: &[Value], out: &mut String) {
    out.push_str("<params>");
    for p in params {
        out.push_str("<param>");
        write_value(p, out);
        out.push_str("</param>");
    }
    out.push_str("</params>");
}

pub fn encode_call(method: &str, params: &[Value]) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n<methodCall><methodName>");
    escape(method, &mut out);
    out.push_str("</methodName>");
    write_params(params, &mut out);
    out.push_str("</methodCall>\n");
    out
}

pub fn encode_response(value: &Value) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n<methodResponse>");
    write_params(std::slice::from_ref(value), &mut out);
    out.push_str("</methodResponse>\n");
    out
}

pub fn encode_fault(fault: &Fault) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\"?>\n<methodResponse><fault><value><struct><member><name>faultCode</name>",
    );
    write_value(&Value::Int(fault.code), &mut out);
    out.push_str("</member><member><name>faultString</name>");
    write_value(&Value::String(fault.message.clone()), &mut out);
    out.push_str("</member></struct></value></fault></methodResponse>\n");
    out
}

fn parse_err(msg: impl Into<String>) -> XmlRpcError {
    XmlRpcError::Parse(msg.into())
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|n| n.is_element())
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Result<Node<'a, 'i>, XmlRpcError> {
    elements(node)
        .find(|n| n.has_tag_name(name))
        .ok_or_else(|| parse_err(format!("<{}> has no <{}>", node.tag_name().name(), name)))
}

fn text_of(node: Node<'_, '_>) -> String {
    node.children().filter(|n| n.is_text()).filter_map(|n| n.text()).collect()
}

fn parse_value(node: Node<'_, '_>) -> Result<Value, XmlRpcError> {
    let Some(typed) = elements(node).next() else {
        // untyped values are strings
        return Ok(Value::String(text_of(node)));
    };
    let text = || text_of(typed);
    match typed.tag_name().name() {
        "i4" | "int" => text()
            .trim()
            .parse()
            .map(Value::Int)
            .map_err(|e| parse_err(format!("bad int: {e}"))),
        "boolean" => match text().trim() {
            "1" | "true" => Ok(Value::Bool(true)),
            "0" | "false" => Ok(Value::Bool(false)),
            other => Err(parse_err(format!("bad boolean `{other}`"))),
        },
        "string" => Ok(Value::String(text())),
        "double" => text()
            .trim()
            .parse()
            .map(Value::Double)
            .map_err(|e| parse_err(format!("bad double: {e}"))),
        "array" => {
            let data = child(typed, "data")?;
            elements(data)
                .filter(|n| n.has_tag_name("value"))
                .map(parse_value)
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array)
        }
        other => Err(parse_err(format!("unsupported value type <{other}>"))),
    }
}

fn parse_params(node: Node<'_, '_>) -> Result<Vec<Value>, XmlRpcError> {
    elements(node)
        .filter(|n| n.has_tag_name("param"))
        .map(|p| parse_value(child(p, "value")?))
        .collect()
}

pub fn decode_call(xml: &str) -> Result<MethodCall, XmlRpcError> {
    let doc = Document::parse(xml).map_err(|e| parse_err(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("methodCall") {
        return Err(parse_err("root is not <methodCall>"));
    }
    let method = text_of(child(root, "methodName")?).trim().to_string();
    let params = match elements(root).find(|n| n.has_tag_name("params")) {
        Some(p) => parse_params(p)?,
        None => Vec::new(),
    };
    Ok(MethodCall { method, params })
}

fn parse_fault(node: Node<'_, '_>) -> Result<Fault, XmlRpcError> {
    let st = child(child(node, "value")?, "struct")?;
    let mut fault = Fault::new(0, "");
    for member in elements(st).filter(|n| n.has_tag_name("member")) {
        let name = text_of(child(member, "name")?);
        let value = parse_value(child(member, "value")?)?;
        match (name.trim(), value) {
            ("faultCode", Value::Int(c)) => fault.code = c,
            ("faultString", Value::String(s)) => fault.message = s,
            _ => {}
        }
    }
    Ok(fault)
}

/// Decodes a `<methodResponse>`, mapping `<fault>` to [`XmlRpcError::Fault`].
pub fn decode_response(xml: &str) -> Result<Value, XmlRpcError> {
    let doc = Document::parse(xml).map_err(|e| parse_err(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("methodResponse") {
        return Err(parse_err("root is not <methodResponse>"));
    }
    if let Some(f) = elements(root).find(|n| n.has_tag_name("fault")) {
        return Err(XmlRpcError::Fault(parse_fault(f)?));
    }
    let mut params = parse_params(child(root, "params")?)?;
    if params.len() != 1 {
        return Err(parse_err(format!("expected one response param, got {}", params.len())));
    }
    Ok(params.remove(0))
}

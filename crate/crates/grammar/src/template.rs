//! Minimal template engine used by the source generator.
//!
//! Syntax:
//!
//! * `{{name}}` is replaced by the value bound to `name`.
//! * `{{#items}} ... {{/items}}` repeats its body once per element of the
//!   list `items`. Inside the body, the element's bindings shadow the outer
//!   ones.
//! * `{{! ... }}` is a comment and produces nothing.
//!
//! A section or comment tag alone on its line consumes that whole line, so
//! templates can be laid out one tag per line without leaving blank lines.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template line {line}: unknown placeholder `{name}`")]
    UnknownPlaceholder { line: usize, name: String },
    #[error("template line {line}: unknown list `{name}`")]
    UnknownList { line: usize, name: String },
    #[error("template line {line}: unterminated tag")]
    UnterminatedTag { line: usize },
    #[error("template line {line}: `{{{{/{found}}}}}` does not close `{expected}`")]
    MismatchedSection {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("unclosed section `{0}`")]
    UnclosedSection(String),
}

/// Bindings for one rendering scope.
#[derive(Debug, Clone, Default)]
pub struct Context {
    vars: HashMap<String, String>,
    lists: HashMap<String, Vec<Context>>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: impl Into<String>) -> &mut Self {
        self.vars.insert(name.to_string(), value.into());
        self
    }

    pub fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.set(name, value);
        self
    }

    pub fn set_list(&mut self, name: &str, items: Vec<Context>) -> &mut Self {
        self.lists.insert(name.to_string(), items);
        self
    }
}

#[derive(Debug)]
enum Node {
    Text(String),
    Var {
        name: String,
        line: usize,
    },
    Section {
        name: String,
        line: usize,
        body: Vec<Node>,
    },
}

/// A parsed template, reusable across renders.
#[derive(Debug)]
pub struct Template {
    nodes: Vec<Node>,
}

fn line_of(source: &str, pos: usize) -> usize {
    source[..pos].matches('\n').count() + 1
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let mut stack: Vec<(String, usize, Vec<Node>)> = vec![(String::new(), 0, Vec::new())];
        let mut pos = 0;
        while pos < source.len() {
            let Some(rel) = source[pos..].find("{{") else {
                push_text(&mut stack.last_mut().unwrap().2, &source[pos..]);
                break;
            };
            let open = pos + rel;
            let line = line_of(source, open);
            let close = source[open + 2..]
                .find("}}")
                .map(|c| open + 2 + c)
                .ok_or(TemplateError::UnterminatedTag { line })?;
            let tag = source[open + 2..close].trim();
            let mut text_end = open;
            let mut next = close + 2;

            // A section or comment tag alone on its line eats the line.
            if matches!(tag.as_bytes().first(), Some(b'#' | b'/' | b'!')) {
                let line_start = source[..open].rfind('\n').map_or(0, |i| i + 1);
                let line_end = source[next..].find('\n').map_or(source.len(), |i| next + i);
                let before_blank = source[line_start..open].trim().is_empty();
                let after_blank = source[next..line_end].trim().is_empty();
                if before_blank && after_blank {
                    text_end = line_start.max(pos);
                    next = (line_end + 1).min(source.len());
                }
            }
            push_text(&mut stack.last_mut().unwrap().2, &source[pos..text_end]);
            pos = next;

            if let Some(name) = tag.strip_prefix('#') {
                stack.push((name.trim().to_string(), line, Vec::new()));
            } else if let Some(name) = tag.strip_prefix('/') {
                let (open_name, open_line, body) = stack.pop().unwrap();
                if stack.is_empty() || open_name != name.trim() {
                    return Err(TemplateError::MismatchedSection {
                        line,
                        expected: open_name,
                        found: name.trim().to_string(),
                    });
                }
                stack.last_mut().unwrap().2.push(Node::Section {
                    name: open_name,
                    line: open_line,
                    body,
                });
            } else if !tag.starts_with('!') {
                stack.last_mut().unwrap().2.push(Node::Var {
                    name: tag.to_string(),
                    line,
                });
            }
        }
        if stack.len() > 1 {
            return Err(TemplateError::UnclosedSection(stack.pop().unwrap().0));
        }
        Ok(Template {
            nodes: stack.pop().unwrap().2,
        })
    }

    pub fn render(&self, ctx: &Context) -> Result<String, TemplateError> {
        let mut out = String::new();
        render_nodes(&self.nodes, &[ctx], &mut out)?;
        Ok(out)
    }
}

fn push_text(nodes: &mut Vec<Node>, text: &str) {
    if text.is_empty() {
        return;
    }
    if let Some(Node::Text(prev)) = nodes.last_mut() {
        prev.push_str(text);
    } else {
        nodes.push(Node::Text(text.to_string()));
    }
}

fn render_nodes(
    nodes: &[Node],
    scopes: &[&Context],
    out: &mut String,
) -> Result<(), TemplateError> {
    for node in nodes {
        match node {
            Node::Text(t) => out.push_str(t),
            Node::Var { name, line } => {
                let value = scopes
                    .iter()
                    .rev()
                    .find_map(|c| c.vars.get(name))
                    .ok_or_else(|| TemplateError::UnknownPlaceholder {
                        line: *line,
                        name: name.clone(),
                    })?;
                out.push_str(value);
            }
            Node::Section { name, line, body } => {
                let items = scopes
                    .iter()
                    .rev()
                    .find_map(|c| c.lists.get(name))
                    .ok_or_else(|| TemplateError::UnknownList {
                        line: *line,
                        name: name.clone(),
                    })?;
                for item in items {
                    let mut inner = scopes.to_vec();
                    inner.push(item);
                    render_nodes(body, &inner, out)?;
                }
            }
        }
    }
    Ok(())
}

/// Parses and renders in one step.
pub fn render(source: &str, ctx: &Context) -> Result<String, TemplateError> {
    Template::parse(source)?.render(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_and_expands() {
        let mut ctx = Context::new();
        ctx.set("name", "Point");
        ctx.set_list(
            "fields",
            vec![Context::new().with("f", "x"), Context::new().with("f", "y")],
        );
        let src = "struct {{name}} {\n    {{#fields}}\n    {{f}}: f32,\n    {{/fields}}\n}\n";
        assert_eq!(
            render(src, &ctx).unwrap(),
            "struct Point {\n    x: f32,\n    y: f32,\n}\n"
        );
    }

    #[test]
    fn inline_sections_and_outer_scope() {
        let mut ctx = Context::new();
        ctx.set("sep", ", ");
        ctx.set_list(
            "xs",
            vec![Context::new().with("v", "1"), Context::new().with("v", "2")],
        );
        assert_eq!(
            render("[{{#xs}}{{v}}{{sep}}{{/xs}}]", &ctx).unwrap(),
            "[1, 2, ]"
        );
    }

    #[test]
    fn comments_vanish() {
        let ctx = Context::new().with("a", "A");
        assert_eq!(render("{{! note }}\n{{a}}\n", &ctx).unwrap(), "A\n");
        assert_eq!(render("{{! two\n lines }}\n{{a}}", &ctx).unwrap(), "A");
    }

    #[test]
    fn errors_are_positioned() {
        let ctx = Context::new();
        assert_eq!(
            render("ok\n{{missing}}", &ctx).unwrap_err(),
            TemplateError::UnknownPlaceholder {
                line: 2,
                name: "missing".into()
            }
        );
        assert!(matches!(
            render("{{#a}}x", &ctx),
            Err(TemplateError::UnclosedSection(_))
        ));
        assert!(matches!(
            render("{{#a}}x{{/b}}", &ctx),
            Err(TemplateError::MismatchedSection { .. })
        ));
        assert!(matches!(
            render("{{oops", &ctx),
            Err(TemplateError::UnterminatedTag { line: 1 })
        ));
    }
}

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use tree_sitter::{Node, Parser, Tree};

use super::lexicon::{is_preserved, is_reserved};
use super::{AbstractedCode, Language};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Role {
    Var,
    Class,
    Func,
}

impl Role {
    fn prefix(self) -> &'static str {
        match self {
            Role::Var => "VAR",
            Role::Class => "CLASS",
            Role::Func => "FUNC",
        }
    }
}

fn parse(text: &str, language: Language) -> Option<Tree> {
    let mut parser = Parser::new();
    let lang: tree_sitter::Language = match language {
        Language::Python => tree_sitter_python::LANGUAGE.into(),
        Language::Cpp => tree_sitter_cpp::LANGUAGE.into(),
    };
    parser.set_language(&lang).ok()?;
    parser.parse(text, None)
}

/// True when `text` parses without any error or missing node.
pub fn syntax_is_valid(text: &str, language: Language) -> bool {
    parse(text, language).is_some_and(|tree| !tree.root_node().has_error())
}

pub(super) fn abstract_source(text: &str, language: Language) -> AbstractedCode {
    match parse(text, language) {
        Some(tree) => {
            let root = tree.root_node();
            let bindings = Bindings::collect(root, text.as_bytes(), language);
            let mut emitter = Emitter::new(text.as_bytes(), language, &bindings);
            emitter.walk(root);
            AbstractedCode::from_lines(language, emitter.finish(), false)
        }
        None => degraded(text, language),
    }
}

fn degraded(text: &str, language: Language) -> AbstractedCode {
    let lines = text
        .lines()
        .map(|line| lex(line).collect::<Vec<_>>().join(" "))
        .filter(|line| !line.is_empty())
        .collect();
    AbstractedCode::from_lines(language, lines, true)
}

fn lexer() -> &'static Regex {
    static LEXER: OnceLock<Regex> = OnceLock::new();
    LEXER.get_or_init(|| {
        Regex::new(
            r#"(?x)
            "(?:\\.|[^"\\])*"
          | '(?:\\.|[^'\\])*'
          | [0-9][A-Za-z0-9_.]*
          | [A-Za-z_][A-Za-z0-9_]*
          | <<=|>>=|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\||::|\+=|-=|\*=|/=|%=|&=|\|=|\^=|\#\#|//|\*\*
          | \S"#,
        )
        .expect("lexer regex")
    })
}

fn lex(text: &str) -> impl Iterator<Item = &str> {
    lexer().find_iter(text).map(|m| m.as_str())
}

fn is_literal_text(token: &str) -> bool {
    token.starts_with('"')
        || token.starts_with('\'')
        || token.chars().next().is_some_and(|c| c.is_ascii_digit())
}

fn is_identifier_text(token: &str) -> bool {
    token
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
}

fn text_of<'a>(node: Node<'_>, src: &'a [u8]) -> &'a str {
    node.utf8_text(src).unwrap_or("")
}

fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

/// Names the unit itself introduces, with the role of their strongest binding.
struct Bindings {
    roles: HashMap<String, Role>,
    imported: HashSet<String>,
    /// Attribute names the unit assigns to (`self.total = ...`).
    attributes: HashSet<String>,
}

impl Bindings {
    fn collect(root: Node<'_>, src: &[u8], language: Language) -> Self {
        let mut b = Bindings {
            roles: HashMap::new(),
            imported: HashSet::new(),
            attributes: HashSet::new(),
        };
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            match language {
                Language::Python => b.python_node(node, src),
                Language::Cpp => b.cpp_node(node, src),
            }
            let mut cursor = node.walk();
            stack.extend(node.children(&mut cursor));
        }
        b.roles.retain(|name, _| !is_reserved(language, name));
        b.attributes.retain(|name| !is_reserved(language, name));
        b
    }

    fn bind(&mut self, name: &str, role: Role) {
        if name.is_empty() {
            return;
        }
        let slot = self.roles.entry(name.to_string()).or_insert(role);
        if role > *slot {
            *slot = role;
        }
    }

    fn bind_node(&mut self, node: Option<Node<'_>>, src: &[u8], role: Role) {
        if let Some(n) = node {
            self.bind(text_of(n, src), role);
        }
    }

    fn python_node(&mut self, node: Node<'_>, src: &[u8]) {
        match node.kind() {
            "function_definition" => self.bind_node(node.child_by_field_name("name"), src, Role::Func),
            "class_definition" => self.bind_node(node.child_by_field_name("name"), src, Role::Class),
            "parameters" | "lambda_parameters" => {
                for param in named_children(node) {
                    self.python_parameter(param, src);
                }
            }
            "assignment" | "augmented_assignment" | "for_statement" | "for_in_clause" => {
                if let Some(left) = node.child_by_field_name("left") {
                    self.python_target(left, src);
                }
            }
            "named_expression" => self.bind_node(node.child_by_field_name("name"), src, Role::Var),
            "as_pattern_target" => self.python_target(node, src),
            "import_statement" | "import_from_statement" | "future_import_statement" => {
                let mut stack = vec![node];
                while let Some(n) = stack.pop() {
                    if n.kind() == "identifier" {
                        self.imported.insert(text_of(n, src).to_string());
                    }
                    stack.extend(named_children(n));
                }
            }
            _ => {}
        }
    }

    fn python_parameter(&mut self, param: Node<'_>, src: &[u8]) {
        match param.kind() {
            "identifier" => self.bind(text_of(param, src), Role::Var),
            "default_parameter" | "typed_default_parameter" => {
                if let Some(name) = param.child_by_field_name("name") {
                    self.python_target(name, src);
                }
            }
            "typed_parameter" | "list_splat_pattern" | "dictionary_splat_pattern" => {
                for child in named_children(param) {
                    if child.kind() != "type" {
                        self.python_target(child, src);
                    }
                }
            }
            "tuple_pattern" => self.python_target(param, src),
            _ => {}
        }
    }

    fn python_target(&mut self, node: Node<'_>, src: &[u8]) {
        match node.kind() {
            "identifier" => self.bind(text_of(node, src), Role::Var),
            "attribute" => {
                if let Some(attr) = node.child_by_field_name("attribute") {
                    self.attributes.insert(text_of(attr, src).to_string());
                }
            }
            "pattern_list" | "tuple_pattern" | "list_pattern" | "expression_list" | "tuple"
            | "list" | "parenthesized_expression" | "list_splat_pattern" | "list_splat"
            | "as_pattern_target" => {
                for child in named_children(node) {
                    self.python_target(child, src);
                }
            }
            _ => {}
        }
    }

    fn cpp_node(&mut self, node: Node<'_>, src: &[u8]) {
        match node.kind() {
            "function_declarator" => {
                if let Some(decl) = node.child_by_field_name("declarator") {
                    match decl.kind() {
                        "identifier" | "field_identifier" => self.bind(text_of(decl, src), Role::Func),
                        "qualified_identifier" => {
                            self.bind_node(decl.child_by_field_name("name"), src, Role::Func)
                        }
                        _ => {}
                    }
                }
            }
            "declaration" | "field_declaration" | "parameter_declaration"
            | "optional_parameter_declaration" | "variadic_parameter_declaration"
            | "for_range_loop" => {
                for decl in children_by_field(node, "declarator") {
                    self.cpp_declarator(decl, src, Role::Var);
                }
            }
            "type_definition" => {
                for decl in children_by_field(node, "declarator") {
                    self.cpp_declarator(decl, src, Role::Class);
                }
            }
            "struct_specifier" | "class_specifier" | "union_specifier" | "enum_specifier" => {
                if node.child_by_field_name("body").is_some() {
                    self.bind_node(node.child_by_field_name("name"), src, Role::Class);
                }
            }
            "alias_declaration" => self.bind_node(node.child_by_field_name("name"), src, Role::Class),
            "type_parameter_declaration" | "optional_type_parameter_declaration" => {
                for child in named_children(node) {
                    if child.kind() == "type_identifier" {
                        self.bind(text_of(child, src), Role::Class);
                    }
                }
            }
            "enumerator" => self.bind_node(node.child_by_field_name("name"), src, Role::Var),
            "preproc_def" => self.bind_node(node.child_by_field_name("name"), src, Role::Var),
            "preproc_function_def" => {
                self.bind_node(node.child_by_field_name("name"), src, Role::Func)
            }
            "preproc_params" => {
                for child in named_children(node) {
                    if child.kind() == "identifier" {
                        self.bind(text_of(child, src), Role::Var);
                    }
                }
            }
            _ => {}
        }
    }

    fn cpp_declarator(&mut self, decl: Node<'_>, src: &[u8], role: Role) {
        let mut current = decl;
        loop {
            match current.kind() {
                "identifier" | "field_identifier" | "type_identifier" => {
                    self.bind(text_of(current, src), role);
                    return;
                }
                "function_declarator" | "qualified_identifier" | "operator_name" => return,
                "structured_binding_declarator" => {
                    for child in named_children(current) {
                        if child.kind() == "identifier" {
                            self.bind(text_of(child, src), role);
                        }
                    }
                    return;
                }
                _ => {
                    let next = current
                        .child_by_field_name("declarator")
                        .or_else(|| named_children(current).into_iter().find(|c| c.kind().contains("declarator") || c.kind() == "identifier"));
                    match next {
                        Some(n) => current = n,
                        None => return,
                    }
                }
            }
        }
    }

    fn role(&self, name: &str) -> Option<Role> {
        self.roles.get(name).copied()
    }
}

fn children_by_field<'t>(node: Node<'t>, field: &str) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.children_by_field_name(field, &mut cursor).collect()
}

const PY_LINE_NODES: &[&str] = &[
    "function_definition",
    "class_definition",
    "decorated_definition",
    "decorator",
    "elif_clause",
    "else_clause",
    "except_clause",
    "except_group_clause",
    "finally_clause",
    "case_clause",
    "block",
];

const CPP_LINE_NODES: &[&str] = &[
    "function_definition",
    "field_declaration",
    "type_definition",
    "alias_declaration",
    "using_declaration",
    "namespace_definition",
    "template_declaration",
    "linkage_specification",
    "access_specifier",
    "else_clause",
    "preproc_include",
    "preproc_def",
    "preproc_function_def",
    "preproc_call",
    "preproc_if",
    "preproc_ifdef",
    "preproc_else",
    "preproc_elif",
];

const CPP_BRACE_BLOCKS: &[&str] = &[
    "compound_statement",
    "field_declaration_list",
    "declaration_list",
];

fn starts_line(language: Language, node: Node<'_>) -> bool {
    let kind = node.kind();
    match language {
        Language::Python => kind.ends_with("_statement") || PY_LINE_NODES.contains(&kind),
        Language::Cpp => {
            if kind == "compound_statement" {
                return false;
            }
            if kind == "declaration" {
                let parent = node.parent().map(|p| p.kind()).unwrap_or("");
                return !matches!(
                    parent,
                    "for_statement" | "for_range_loop" | "condition_clause" | "init_statement"
                );
            }
            kind.ends_with("_statement") || CPP_LINE_NODES.contains(&kind)
        }
    }
}

fn is_atomic_literal(language: Language, kind: &str) -> bool {
    match language {
        Language::Python => matches!(kind, "integer" | "float" | "string"),
        Language::Cpp => matches!(
            kind,
            "number_literal" | "string_literal" | "char_literal" | "raw_string_literal" | "user_defined_literal"
        ),
    }
}

struct Emitter<'a> {
    src: &'a [u8],
    language: Language,
    bindings: &'a Bindings,
    numbering: HashMap<Role, HashMap<String, usize>>,
    literals: HashMap<String, usize>,
    current: Vec<String>,
    lines: Vec<String>,
    error_depth: usize,
    import_depth: usize,
}

impl<'a> Emitter<'a> {
    fn new(src: &'a [u8], language: Language, bindings: &'a Bindings) -> Self {
        Self {
            src,
            language,
            bindings,
            numbering: HashMap::new(),
            literals: HashMap::new(),
            current: Vec::new(),
            lines: Vec::new(),
            error_depth: 0,
            import_depth: 0,
        }
    }

    fn finish(mut self) -> Vec<String> {
        self.flush();
        self.lines
    }

    fn flush(&mut self) {
        if !self.current.is_empty() {
            self.lines.push(self.current.join(" "));
            self.current.clear();
        }
    }

    fn push_verbatim(&mut self, text: &str) {
        self.current
            .extend(text.split_whitespace().map(str::to_string));
    }

    fn placeholder(&mut self, role: Role, name: &str) -> String {
        let table = self.numbering.entry(role).or_default();
        let next = table.len();
        let index = *table.entry(name.to_string()).or_insert(next);
        format!("{}_{}", role.prefix(), index)
    }

    fn literal(&mut self, text: &str) -> String {
        let next = self.literals.len();
        let index = *self.literals.entry(text.to_string()).or_insert(next);
        format!("LIT_{index}")
    }

    /// Iterative pre/post-order walk; deep expression chains must not
    /// overflow the stack.
    fn walk<'t>(&mut self, root: Node<'t>) {
        enum Visit<'t> {
            Enter(Node<'t>, Option<&'t str>),
            Leave(Node<'t>),
        }
        let mut stack: Vec<Visit<'t>> = vec![Visit::Enter(root, None)];
        while let Some(visit) = stack.pop() {
            match visit {
                Visit::Enter(node, field) => {
                    let kind = node.kind();
                    if kind == "comment" {
                        continue;
                    }
                    if self.error_depth == 0 && is_atomic_literal(self.language, kind) {
                        let text = text_of(node, self.src).to_string();
                        let lit = self.literal(&text);
                        self.current.push(lit);
                        continue;
                    }
                    if node.child_count() == 0 {
                        self.leaf(node, field);
                        continue;
                    }
                    if starts_line(self.language, node) {
                        self.flush();
                    }
                    if node.is_error() {
                        self.error_depth += 1;
                    }
                    if matches!(kind, "import_statement" | "import_from_statement" | "future_import_statement") {
                        self.import_depth += 1;
                    }
                    stack.push(Visit::Leave(node));
                    let mut cursor = node.walk();
                    let mut children = Vec::new();
                    if cursor.goto_first_child() {
                        loop {
                            children.push(Visit::Enter(cursor.node(), cursor.field_name()));
                            if !cursor.goto_next_sibling() {
                                break;
                            }
                        }
                    }
                    stack.extend(children.into_iter().rev());
                }
                Visit::Leave(node) => {
                    if node.is_error() {
                        self.error_depth -= 1;
                    }
                    if matches!(node.kind(), "import_statement" | "import_from_statement" | "future_import_statement") {
                        self.import_depth -= 1;
                    }
                    if starts_line(self.language, node) {
                        self.flush();
                    }
                }
            }
        }
    }

    fn leaf(&mut self, node: Node<'_>, field: Option<&str>) {
        if node.is_missing() {
            return;
        }
        let text = text_of(node, self.src);
        if text.trim().is_empty() {
            return;
        }
        let kind = node.kind();
        if self.error_depth > 0 {
            self.push_verbatim(text);
            return;
        }
        match self.language {
            Language::Python => {
                if kind == "line_continuation" || (text == ";" && !node.is_named()) {
                    return;
                }
                if kind == "identifier" {
                    let token = self.python_identifier(node, field, text);
                    self.current.push(token);
                } else {
                    self.push_verbatim(text);
                }
            }
            Language::Cpp => {
                let parent_kind = node.parent().map(|p| p.kind()).unwrap_or("");
                match kind {
                    "identifier" | "type_identifier" | "field_identifier"
                    | "namespace_identifier" | "statement_identifier" => {
                        let token = self.cpp_identifier(node, field, text);
                        self.current.push(token);
                    }
                    "preproc_arg" => self.preproc_arg(text),
                    "{" if CPP_BRACE_BLOCKS.contains(&parent_kind) => {
                        self.current.push("{".to_string());
                        self.flush();
                    }
                    "}" if CPP_BRACE_BLOCKS.contains(&parent_kind) => {
                        self.flush();
                        self.current.push("}".to_string());
                    }
                    _ => self.push_verbatim(text),
                }
            }
        }
    }

    fn python_identifier(&mut self, node: Node<'_>, field: Option<&str>, name: &str) -> String {
        let lang = self.language;
        if is_reserved(lang, name) || self.import_depth > 0 {
            return name.to_string();
        }
        let parent_kind = node.parent().map(|p| p.kind()).unwrap_or("");
        let role = self.bindings.role(name);
        if parent_kind == "attribute" && field == Some("attribute") {
            return match role {
                Some(r @ (Role::Func | Role::Class)) => self.placeholder(r, name),
                _ if self.bindings.attributes.contains(name) => self.placeholder(Role::Var, name),
                _ => name.to_string(),
            };
        }
        if parent_kind == "keyword_argument" && field == Some("name") {
            return match role {
                Some(r) => self.placeholder(r, name),
                None => name.to_string(),
            };
        }
        match role {
            Some(r) => self.placeholder(r, name),
            None if self.bindings.imported.contains(name) || is_preserved(lang, name) => name.to_string(),
            None => self.placeholder(Role::Var, name),
        }
    }

    fn cpp_identifier(&mut self, node: Node<'_>, field: Option<&str>, name: &str) -> String {
        let lang = self.language;
        if is_reserved(lang, name) {
            return name.to_string();
        }
        if field == Some("name") {
            if let Some(parent) = node.parent().filter(|p| p.kind() == "qualified_identifier") {
                let library_scope = parent
                    .child_by_field_name("scope")
                    .filter(|s| s.kind() == "namespace_identifier")
                    .is_some_and(|s| self.bindings.role(text_of(s, self.src)).is_none());
                if library_scope {
                    return name.to_string();
                }
            }
        }
        match (self.bindings.role(name), node.kind()) {
            (Some(r), _) => self.placeholder(r, name),
            (None, "identifier") if !is_preserved(lang, name) => self.placeholder(Role::Var, name),
            _ => name.to_string(),
        }
    }

    fn preproc_arg(&mut self, text: &str) {
        let tokens: Vec<String> = lex(text).map(str::to_string).collect();
        for token in tokens {
            let out = if is_literal_text(&token) {
                self.literal(&token)
            } else if is_identifier_text(&token) {
                match self.bindings.role(&token) {
                    Some(r) if !is_reserved(self.language, &token) => self.placeholder(r, &token),
                    _ if is_preserved(self.language, &token) || is_reserved(self.language, &token) => token,
                    _ => self.placeholder(Role::Var, &token),
                }
            } else {
                token
            };
            self.current.push(out);
        }
    }
}

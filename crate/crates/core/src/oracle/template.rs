use std::path::Path;

use super::OracleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateMode {
    /// Placeholders `{user}`, `{content_1}`, `{content_2}`.
    Pairwise,
    /// Placeholders `{user}`, `{content}`.
    Numeric,
}

impl TemplateMode {
    fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateMode::Pairwise => &["user", "content_1", "content_2"],
            TemplateMode::Numeric => &["user", "content"],
        }
    }
}

/// A prompt body with named `{placeholder}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub mode: TemplateMode,
}

impl PromptTemplate {
    pub fn new(name: &str, body: &str, mode: TemplateMode) -> Result<Self, OracleError> {
        let template = Self {
            name: name.to_owned(),
            body: body.to_owned(),
            mode,
        };
        template.validate()?;
        Ok(template)
    }

    /// Reads a template file. One trailing newline is dropped.
    pub fn load(path: &Path, mode: TemplateMode) -> Result<Self, OracleError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        let body = body.strip_suffix('\n').unwrap_or(&body);
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(&name, body, mode)
    }

    pub fn donation_pairwise() -> Self {
        Self::new(
            "donation_pairwise",
            include_str!("../../templates/donation_pairwise.txt"),
            TemplateMode::Pairwise,
        )
        .expect("bundled template is valid")
    }

    pub fn vaccine_pairwise() -> Self {
        Self::new(
            "vaccine_pairwise",
            include_str!("../../templates/vaccine_pairwise.txt"),
            TemplateMode::Pairwise,
        )
        .expect("bundled template is valid")
    }

    pub fn donation_score() -> Self {
        Self::new(
            "donation_score",
            include_str!("../../templates/donation_score.txt"),
            TemplateMode::Numeric,
        )
        .expect("bundled template is valid")
    }

    /// Every placeholder the mode needs appears exactly once, and no
    /// placeholder of the other mode appears at all.
    pub fn validate(&self) -> Result<(), OracleError> {
        let found = placeholders(&self.body);
        for want in self.mode.placeholders() {
            let n = found.iter().filter(|(name, _)| name == want).count();
            if n != 1 {
                return Err(OracleError::Config(format!(
                    "template `{}`: placeholder {{{want}}} appears {n} times",
                    self.name
                )));
            }
        }
        for (name, _) in &found {
            if !self.mode.placeholders().contains(&name.as_str()) {
                return Err(OracleError::Config(format!(
                    "template `{}`: unexpected placeholder {{{name}}}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Substitutes values in one pass; substituted text is never rescanned.
    pub fn fill(&self, values: &[(&str, &str)]) -> Result<String, OracleError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut last = 0;
        for (name, start) in placeholders(&self.body) {
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| OracleError::Config(format!("no value for {{{name}}}")))?;
            out.push_str(&self.body[last..start]);
            out.push_str(value);
            last = start + name.len() + 2;
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }

    pub fn fill_pairwise(&self, user: &str, first: &str, second: &str) -> Result<String, OracleError> {
        self.fill(&[("user", user), ("content_1", first), ("content_2", second)])
    }

    pub fn fill_numeric(&self, user: &str, content: &str) -> Result<String, OracleError> {
        self.fill(&[("user", user), ("content", content)])
    }
}

/// `(name, byte offset of '{')` for every `{identifier}` in the body.
fn placeholders(body: &str) -> Vec<(String, usize)> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let rest = &body[i + 1..];
            if let Some(end) = rest.find('}') {
                let name = &rest[..end];
                if !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                    out.push((name.to_owned(), i));
                    i += end + 2;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Attribute, AttributeKind, DataError, FeatureValue, ItemAttribute, ItemCatalog, UserFeatureSpec,
    UserFeatures,
};
use crate::oracle::Choice;

fn default_delimiter() -> char {
    ','
}

fn default_suffixes() -> [String; 2] {
    ["_1".into(), "_2".into()]
}

fn default_choice_values() -> [String; 2] {
    ["1".into(), "2".into()]
}

/// Column layout of a paired-profile conjoint survey export.
///
/// Each row is one task: the participant's attributes, the two presented
/// profiles (item columns with `profile_suffixes` appended) and which of the
/// two was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjointSchema {
    pub participant_column: String,
    pub task_column: String,
    pub choice_column: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_suffixes")]
    pub profile_suffixes: [String; 2],
    /// Values of the choice column meaning "first profile" and "second".
    #[serde(default = "default_choice_values")]
    pub choice_values: [String; 2],
    /// Personal columns kept by the partial-personal mask.
    #[serde(default)]
    pub partial_personal: Option<Vec<String>>,
    pub user_columns: Vec<Attribute>,
    pub item_columns: Vec<ItemAttribute>,
}

impl ConjointSchema {
    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        let schema: Self =
            toml::from_str(text).map_err(|e| DataError::Schema(format!("invalid schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.item_columns.is_empty() {
            return Err(DataError::Schema("schema declares no item columns".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(DataError::Schema("delimiter must be a single ASCII character".into()));
        }
        if self.profile_suffixes[0] == self.profile_suffixes[1] {
            return Err(DataError::Schema("profile suffixes must differ".into()));
        }
        if self.choice_values[0] == self.choice_values[1] {
            return Err(DataError::Schema("choice values must differ".into()));
        }
        for a in &self.item_columns {
            if a.levels.is_empty() {
                return Err(DataError::Schema(format!("item column `{}` has no levels", a.name)));
            }
        }
        self.user_spec()?;
        Ok(())
    }

    pub fn user_spec(&self) -> Result<UserFeatureSpec, DataError> {
        UserFeatureSpec::new(self.user_columns.clone())
            .map_err(|e| DataError::Schema(e.to_string()))
    }

    pub fn partial_personal(&self) -> Vec<String> {
        self.partial_personal.clone().unwrap_or_else(|| {
            super::DEFAULT_PARTIAL_PERSONAL
                .iter()
                .map(|s| s.to_string())
                .collect()
        })
    }

    fn profile_column(&self, item: &ItemAttribute, profile: usize) -> String {
        format!("{}{}", item.name, self.profile_suffixes[profile])
    }

    /// Header row of a file following this schema.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec![self.participant_column.clone(), self.task_column.clone()];
        h.extend(self.user_columns.iter().map(|a| a.name.clone()));
        for p in 0..2 {
            h.extend(self.item_columns.iter().map(|a| self.profile_column(a, p)));
        }
        h.push(self.choice_column.clone());
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedUser {
    pub participant: String,
    pub features: UserFeatures,
}

/// One recorded pairwise choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoggedTask {
    /// Index into [`ConjointLog::users`].
    pub user: usize,
    pub task: i64,
    /// Catalog ids of the first and second profile.
    pub first: usize,
    pub second: usize,
    pub choice: Choice,
    pub line: u64,
}

/// A parsed conjoint survey: participants, their tasks in recorded order
/// (grouped by participant) and the catalog of observed profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjointLog {
    pub users: Vec<LoggedUser>,
    pub tasks: Vec<LoggedTask>,
    pub catalog: ItemCatalog,
}

impl ConjointLog {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

fn parse_user_value(attr: &Attribute, raw: &str, line: u64) -> Result<FeatureValue, DataError> {
    match &attr.kind {
        AttributeKind::Integer { .. } => raw
            .trim()
            .parse::<i64>()
            .map(FeatureValue::Integer)
            .map_err(|_| DataError::at_line(line, format!("`{}`: `{raw}` is not an integer", attr.name))),
        AttributeKind::Categorical { .. } => Ok(FeatureValue::Category(raw.trim().to_owned())),
    }
}

/// Reads a conjoint log following `schema`.
pub fn load_conjoint_log(path: &Path, schema: &ConjointSchema) -> Result<ConjointLog, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    read_conjoint_log(file, schema)
}

pub fn read_conjoint_log<R: std::io::Read>(reader: R, schema: &ConjointSchema) -> Result<ConjointLog, DataError> {
    schema.validate()?;
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = match csv.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].trim().is_empty()) => h.clone(),
        Ok(_) => return Err(DataError::data("empty conjoint log")),
        Err(e) => return Err(DataError::at_line(1, format!("unreadable header: {e}"))),
    };
    let column = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::Schema(format!("missing column `{name}`")))
    };
    let participant_col = column(&schema.participant_column)?;
    let task_col = column(&schema.task_column)?;
    let choice_col = column(&schema.choice_column)?;
    let user_cols = schema
        .user_columns
        .iter()
        .map(|a| column(&a.name))
        .collect::<Result<Vec<_>, _>>()?;
    let mut item_cols = [Vec::new(), Vec::new()];
    for (p, cols) in item_cols.iter_mut().enumerate() {
        for a in &schema.item_columns {
            cols.push(column(&schema.profile_column(a, p))?);
        }
    }

    struct Row {
        participant: String,
        task: i64,
        profiles: [Vec<usize>; 2],
        choice: Choice,
        line: u64,
    }

    let mut users: Vec<LoggedUser> = Vec::new();
    let mut user_index: HashMap<String, usize> = HashMap::new();
    let mut seen_tasks: HashMap<(usize, i64), u64> = HashMap::new();
    let mut rows: Vec<(usize, Row)> = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::at_line(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let participant = field(participant_col).trim().to_owned();
        if participant.is_empty() {
            return Err(DataError::at_line(line, "empty participant id"));
        }
        let task = field(task_col)
            .trim()
            .parse::<i64>()
            .map_err(|_| DataError::at_line(line, format!("task index `{}` is not an integer", field(task_col))))?;
        let raw_choice = field(choice_col).trim();
        let choice = if raw_choice == schema.choice_values[0] {
            Choice::A
        } else if raw_choice == schema.choice_values[1] {
            Choice::B
        } else {
            return Err(DataError::at_line(
                line,
                format!(
                    "choice `{raw_choice}` is neither `{}` nor `{}`",
                    schema.choice_values[0], schema.choice_values[1]
                ),
            ));
        };
        let mut profiles = [Vec::new(), Vec::new()];
        for (p, cols) in item_cols.iter().enumerate() {
            for (a, &c) in schema.item_columns.iter().zip(cols) {
                let raw = field(c).trim();
                let level = a.levels.iter().position(|l| l == raw).ok_or_else(|| {
                    DataError::at_line(line, format!("unknown level `{raw}` for item column `{}`", a.name))
                })?;
                profiles[p].push(level);
            }
        }
        let features: UserFeatures = schema
            .user_columns
            .iter()
            .zip(&user_cols)
            .map(|(a, &c)| Ok((a.name.clone(), parse_user_value(a, field(c), line)?)))
            .collect::<Result<Vec<_>, DataError>>()
            .map(UserFeatures)?;
        let uid = match user_index.get(&participant) {
            Some(&u) => {
                if users[u].features != features {
                    return Err(DataError::at_line(
                        line,
                        format!("participant `{participant}` has inconsistent attributes"),
                    ));
                }
                u
            }
            None => {
                users.push(LoggedUser {
                    participant: participant.clone(),
                    features,
                });
                user_index.insert(participant.clone(), users.len() - 1);
                users.len() - 1
            }
        };
        if let Some(prev) = seen_tasks.insert((uid, task), line) {
            return Err(DataError::at_line(
                line,
                format!("duplicate task {task} for participant `{participant}` (first at line {prev})"),
            ));
        }
        rows.push((
            uid,
            Row {
                participant,
                task,
                profiles,
                choice,
                line,
            },
        ));
    }
    if rows.is_empty() {
        return Err(DataError::data("conjoint log has no data rows"));
    }
    let observed: Vec<Vec<usize>> = rows
        .iter()
        .flat_map(|(_, r)| r.profiles.iter().cloned())
        .collect();
    let catalog = ItemCatalog::from_items(schema.item_columns.clone(), observed)?;
    let id_of = |levels: &Vec<usize>| -> usize {
        catalog.index_of(levels).expect("observed profile is in catalog")
    };
    // Stable sort keeps recorded order within each participant.
    rows.sort_by_key(|(uid, _)| *uid);
    let tasks = rows
        .iter()
        .map(|(uid, r)| {
            debug_assert_eq!(users[*uid].participant, r.participant);
            LoggedTask {
                user: *uid,
                task: r.task,
                first: id_of(&r.profiles[0]),
                second: id_of(&r.profiles[1]),
                choice: r.choice,
                line: r.line,
            }
        })
        .collect();
    Ok(ConjointLog {
        users,
        tasks,
        catalog,
    })
}

/// One task written by [`write_conjoint_log`]; profiles are level indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjointRow {
    pub participant: String,
    pub task: i64,
    pub features: UserFeatures,
    pub profiles: [Vec<usize>; 2],
    pub choice: Choice,
}

pub fn write_conjoint_log<W: std::io::Write>(
    writer: W,
    schema: &ConjointSchema,
    rows: &[ConjointRow],
) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter as u8)
        .from_writer(writer);
    let err = |e: csv::Error| DataError::data(format!("cannot write conjoint log: {e}"));
    w.write_record(schema.header()).map_err(err)?;
    for row in rows {
        let mut rec = vec![row.participant.clone(), row.task.to_string()];
        for a in &schema.user_columns {
            let v = row
                .features
                .get(&a.name)
                .ok_or_else(|| DataError::data(format!("row lacks user column `{}`", a.name)))?;
            rec.push(v.to_string());
        }
        for profile in &row.profiles {
            for (a, &l) in schema.item_columns.iter().zip(profile) {
                rec.push(a.levels[l].clone());
            }
        }
        rec.push(schema.choice_values[row.choice.index()].clone());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| DataError::data(format!("cannot write conjoint log: {e}")))?;
    Ok(())
}

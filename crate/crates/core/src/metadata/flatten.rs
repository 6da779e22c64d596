use indexmap::IndexMap;

use super::node::{MetadataDocument, Node};
use super::{canonical_field, MetadataError, FILE_NAME};

/// A field value collected on the way to a leaf, with the path of the node
/// that supplied it.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatField {
    pub value: Node,
    pub path: String,
}

/// An alternative spelling that was accepted while flattening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasUse {
    pub alias: String,
    pub canonical: &'static str,
    pub path: String,
}

/// One flattened leaf: every field visible at a `file_name`, deeper values
/// overriding shallower ones. Fields are untyped; see
/// [`FileRecord`](super::FileRecord) for the checked form.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRecord {
    pub group_id: usize,
    /// Path of the mapping that holds `file_name`, e.g. `$.sensors[1]`.
    pub path: String,
    pub fields: IndexMap<String, FlatField>,
    pub aliases: Vec<AliasUse>,
}

impl FlatRecord {
    pub fn get(&self, field: &str) -> Option<&Node> {
        self.fields.get(field).map(|f| &f.value)
    }

    pub fn file_name(&self) -> Option<&str> {
        self.get(FILE_NAME).and_then(Node::as_str)
    }

    /// Builds a record from plain field values (used for typed records).
    pub fn from_fields(group_id: usize, path: impl Into<String>, fields: IndexMap<String, Node>) -> Self {
        let path = path.into();
        let fields = fields
            .into_iter()
            .map(|(k, value)| {
                let field_path = format!("{path}.{k}");
                (k, FlatField { value, path: field_path })
            })
            .collect();
        Self { group_id, path, fields, aliases: Vec::new() }
    }
}

#[derive(Clone, Default)]
struct Context {
    fields: IndexMap<String, FlatField>,
    aliases: Vec<AliasUse>,
}

struct Flattener {
    records: Vec<FlatRecord>,
    next_group: usize,
}

impl Flattener {
    fn alloc_group(&mut self) -> usize {
        let id = self.next_group;
        self.next_group += 1;
        id
    }

    /// `list_group` is the shared group slot when this mapping sits directly
    /// inside a list.
    fn visit_map(
        &mut self,
        map: &IndexMap<String, Node>,
        path: &str,
        inherited: &Context,
        list_group: Option<&mut Option<usize>>,
    ) -> Result<(), MetadataError> {
        let mut ctx = inherited.clone();
        let mut seen: Vec<&'static str> = Vec::new();
        for (key, value) in map {
            let canonical = canonical_field(key);
            if let Some(c) = canonical {
                if seen.contains(&c) {
                    return Err(MetadataError::AliasConflict { path: path.to_string(), field: c.to_string() });
                }
                seen.push(c);
            }
            if value.contains_map() {
                continue;
            }
            let name = canonical.map_or_else(|| key.clone(), str::to_string);
            if canonical.is_some_and(|c| c != key) {
                ctx.aliases.push(AliasUse { alias: key.clone(), canonical: canonical.unwrap_or_default(), path: format!("{path}.{key}") });
            }
            ctx.fields.insert(name, FlatField { value: value.clone(), path: format!("{path}.{key}") });
        }

        let mut list_group = list_group;
        for (key, value) in map {
            if canonical_field(key) == Some(FILE_NAME) {
                if value.as_str().is_none() {
                    return Err(MetadataError::FileNameNotString { path: format!("{path}.{key}") });
                }
                let group_id = match list_group.as_deref_mut() {
                    Some(slot) => *slot.get_or_insert_with(|| {
                        let id = self.next_group;
                        self.next_group += 1;
                        id
                    }),
                    None => self.alloc_group(),
                };
                self.records.push(FlatRecord {
                    group_id,
                    path: path.to_string(),
                    fields: ctx.fields.clone(),
                    aliases: ctx.aliases.clone(),
                });
                continue;
            }
            match value {
                Node::Map(child) => self.visit_map(child, &format!("{path}.{key}"), &ctx, None)?,
                Node::List(items) if value.contains_map() => self.visit_list(items, &format!("{path}.{key}"), &ctx)?,
                _ => {}
            }
        }
        Ok(())
    }

    fn visit_list(&mut self, items: &[Node], path: &str, ctx: &Context) -> Result<(), MetadataError> {
        let mut group: Option<usize> = None;
        for (i, item) in items.iter().enumerate() {
            let item_path = format!("{path}[{i}]");
            match item {
                Node::Map(child) => self.visit_map(child, &item_path, ctx, Some(&mut group))?,
                Node::List(nested) if item.contains_map() => self.visit_list(nested, &item_path, ctx)?,
                _ => {}
            }
        }
        Ok(())
    }
}

/// Resolves the metadata hierarchy into one record per `file_name`, in
/// document order.
///
/// Fields are inherited from every ancestor mapping; a deeper value replaces
/// a shallower one. Leaves found together in one list share a `group_id`;
/// any other leaf starts its own group.
pub fn flatten(doc: &MetadataDocument) -> Result<Vec<FlatRecord>, MetadataError> {
    let mut flattener = Flattener { records: Vec::new(), next_group: 0 };
    flattener.visit_map(doc.root(), "$", &Context::default(), None)?;
    Ok(flattener.records)
}

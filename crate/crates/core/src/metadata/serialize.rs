use indexmap::IndexMap;

use super::node::{emit, Node, DEFAULT_INDENT};
use super::record::FileRecord;
use super::validate::validate;
use super::{MetadataError, FILE_NAME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SerializeLayout {
    /// Every leaf carries all of its fields.
    FlatPerFile,
    /// Fields shared by all records go to the root, fields shared within a
    /// group go to the group mapping, the rest stays on the leaf.
    #[default]
    GroupedByCommonPrefix,
}

const GROUPS_KEY: &str = "signals";
const LEAVES_KEY: &str = "samples";

/// A container key that no record uses as a field name.
fn free_key(base: &str, records: &[IndexMap<String, Node>]) -> String {
    let mut key = base.to_string();
    while records.iter().any(|r| r.contains_key(&key)) {
        key.push('_');
    }
    key
}

/// Fields (except `file_name`) present with equal values in every map.
fn common_fields(maps: &[&IndexMap<String, Node>]) -> IndexMap<String, Node> {
    let Some((first, rest)) = maps.split_first() else {
        return IndexMap::new();
    };
    first
        .iter()
        .filter(|(k, v)| k.as_str() != FILE_NAME && rest.iter().all(|m| m.get(k.as_str()) == Some(v)))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn strip(map: &IndexMap<String, Node>, hoisted: &IndexMap<String, Node>) -> IndexMap<String, Node> {
    map.iter().filter(|(k, _)| !hoisted.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())).collect()
}

fn has_non_finite(node: &Node) -> bool {
    match node {
        Node::Real(r) => !r.is_finite(),
        Node::List(items) => items.iter().any(has_non_finite),
        Node::Map(m) => m.values().any(has_non_finite),
        _ => false,
    }
}

/// Builds the metadata tree for `records`. Records sharing a `group_id` end
/// up in one list, so flattening the result reproduces the same grouping.
pub fn build_tree(records: &[FileRecord], layout: SerializeLayout) -> Result<IndexMap<String, Node>, MetadataError> {
    if records.is_empty() {
        return Err(MetadataError::NothingToSerialize);
    }
    let flats: Vec<_> = records.iter().map(FileRecord::to_flat).collect();
    let report = validate(&flats);
    if !report.is_conformant() {
        return Err(MetadataError::Invalid(report));
    }
    let fields: Vec<IndexMap<String, Node>> = records.iter().map(FileRecord::to_fields).collect();
    if fields.iter().any(|m| m.values().any(has_non_finite)) {
        let mut report = report;
        report.error("$", "non_finite_number", "JSON cannot represent NaN or infinity");
        return Err(MetadataError::Invalid(report));
    }
    if records.len() == 1 {
        return Ok(fields.into_iter().next().unwrap_or_default());
    }

    let mut groups: IndexMap<usize, Vec<usize>> = IndexMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.group_id).or_default().push(i);
    }
    let groups_key = free_key(GROUPS_KEY, &fields);
    let leaves_key = free_key(LEAVES_KEY, &fields);

    let root_common = match layout {
        SerializeLayout::FlatPerFile => IndexMap::new(),
        SerializeLayout::GroupedByCommonPrefix => common_fields(&fields.iter().collect::<Vec<_>>()),
    };

    let mut group_nodes = Vec::with_capacity(groups.len());
    for members in groups.values() {
        let member_fields: Vec<_> = members.iter().map(|&i| strip(&fields[i], &root_common)).collect();
        let group_common = match layout {
            SerializeLayout::GroupedByCommonPrefix if members.len() > 1 && groups.len() > 1 => {
                common_fields(&member_fields.iter().collect::<Vec<_>>())
            }
            _ => IndexMap::new(),
        };
        let leaves: Vec<Node> = member_fields.iter().map(|m| Node::Map(strip(m, &group_common))).collect();
        let mut group = group_common;
        group.insert(leaves_key.clone(), Node::List(leaves));
        group_nodes.push(group);
    }

    let mut root = root_common;
    if group_nodes.len() == 1 {
        let only = group_nodes.pop().unwrap_or_default();
        root.extend(only);
    } else {
        root.insert(groups_key, Node::List(group_nodes.into_iter().map(Node::Map).collect()));
    }
    Ok(root)
}

/// Emits metadata text for `records` with the default 3-space indent.
pub fn serialize_metadata(records: &[FileRecord], layout: SerializeLayout) -> Result<String, MetadataError> {
    serialize_metadata_with(records, layout, DEFAULT_INDENT)
}

pub fn serialize_metadata_with(records: &[FileRecord], layout: SerializeLayout, indent: usize) -> Result<String, MetadataError> {
    let root = build_tree(records, layout)?;
    Ok(emit(&Node::Map(root), indent))
}

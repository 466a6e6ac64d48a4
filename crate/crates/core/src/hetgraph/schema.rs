//! Graph schema: the registry of vertex types, relation types and the
//! (source type, relation, target type) triples a graph may contain.
//!
//! File format, one declaration per line, `#` starts a comment:
//!
//! ```text
//! V <vertex_type>
//! R <relation> <src_type> <dst_type>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{RelId, VertexTypeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationType {
    pub name: String,
    pub src: VertexTypeId,
    pub dst: VertexTypeId,
}

#[derive(Debug, Clone)]
pub struct GraphSchema {
    vertex_types: Vec<String>,
    relations: Vec<RelationType>,
    vertex_index: HashMap<String, VertexTypeId>,
    relation_index: HashMap<String, RelId>,
}

impl PartialEq for GraphSchema {
    fn eq(&self, other: &Self) -> bool {
        self.vertex_types == other.vertex_types && self.relations == other.relations
    }
}

impl GraphSchema {
    /// Builds a validated schema from vertex type names and
    /// `(relation, src_type, dst_type)` declarations.
    pub fn new<V, R>(vertex_types: V, relations: R) -> Result<Self>
    where
        V: IntoIterator,
        V::Item: Into<String>,
        R: IntoIterator<Item = (String, String, String)>,
    {
        let mut schema = GraphSchema {
            vertex_types: Vec::new(),
            relations: Vec::new(),
            vertex_index: HashMap::new(),
            relation_index: HashMap::new(),
        };
        for name in vertex_types {
            schema.add_vertex_type(name.into())?;
        }
        for (name, src, dst) in relations {
            schema.add_relation(name, &src, &dst)?;
        }
        schema.validate()?;
        Ok(schema)
    }

    fn add_vertex_type(&mut self, name: String) -> Result<()> {
        if self.vertex_index.contains_key(&name) {
            return Err(Error::Schema(format!("duplicate vertex type `{name}`")));
        }
        let id = VertexTypeId(self.vertex_types.len() as u32);
        self.vertex_index.insert(name.clone(), id);
        self.vertex_types.push(name);
        Ok(())
    }

    fn add_relation(&mut self, name: String, src: &str, dst: &str) -> Result<()> {
        if self.relation_index.contains_key(&name) {
            return Err(Error::Schema(format!("duplicate relation type `{name}`")));
        }
        let lookup = |t: &str| {
            self.vertex_type(t).ok_or_else(|| {
                Error::Schema(format!("relation `{name}` references unknown vertex type `{t}`"))
            })
        };
        let src = lookup(src)?;
        let dst = lookup(dst)?;
        let id = RelId(self.relations.len() as u32);
        self.relation_index.insert(name.clone(), id);
        self.relations.push(RelationType { name, src, dst });
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.vertex_types.is_empty() && self.relations.is_empty() {
            return Err(Error::Schema("empty schema".into()));
        }
        if self.vertex_types.len() + self.relations.len() <= 2 {
            return Err(Error::Schema(format!(
                "not heterogeneous: {} vertex type(s) + {} relation type(s) must exceed 2",
                self.vertex_types.len(),
                self.relations.len()
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut schema = GraphSchema {
            vertex_types: Vec::new(),
            relations: Vec::new(),
            vertex_index: HashMap::new(),
            relation_index: HashMap::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let at_line = |e: Error| match e {
                Error::Schema(msg) => Error::parse(origin, line_no, msg),
                other => other,
            };
            match fields.as_slice() {
                ["V", name] => schema.add_vertex_type((*name).to_owned()).map_err(at_line)?,
                ["R", name, src, dst] => schema
                    .add_relation((*name).to_owned(), src, dst)
                    .map_err(at_line)?,
                _ => {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("expected `V <name>` or `R <name> <src> <dst>`, got `{line}`"),
                    ))
                }
            }
        }
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in &self.vertex_types {
            let _ = writeln!(out, "V {name}");
        }
        for rel in &self.relations {
            let _ = writeln!(
                out,
                "R {} {} {}",
                rel.name,
                self.vertex_type_name(rel.src),
                self.vertex_type_name(rel.dst)
            );
        }
        out
    }

    pub fn vertex_type_count(&self) -> usize {
        self.vertex_types.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn vertex_type(&self, name: &str) -> Option<VertexTypeId> {
        self.vertex_index.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<RelId> {
        self.relation_index.get(name).copied()
    }

    pub fn vertex_type_name(&self, id: VertexTypeId) -> &str {
        &self.vertex_types[id.index()]
    }

    pub fn relation_type(&self, id: RelId) -> &RelationType {
        &self.relations[id.index()]
    }

    pub fn relation_name(&self, id: RelId) -> &str {
        &self.relations[id.index()].name
    }

    pub fn vertex_types(&self) -> impl Iterator<Item = (VertexTypeId, &str)> {
        self.vertex_types
            .iter()
            .enumerate()
            .map(|(i, n)| (VertexTypeId(i as u32), n.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelId, &RelationType)> {
        self.relations
            .iter()
            .enumerate()
            .map(|(i, r)| (RelId(i as u32), r))
    }

    /// Whether `src -rel-> dst` is a declared triple (direction-sensitive).
    pub fn permits(&self, src: VertexTypeId, rel: RelId, dst: VertexTypeId) -> bool {
        self.relations
            .get(rel.index())
            .is_some_and(|r| r.src == src && r.dst == dst)
    }

    /// Whether a vertex of type `vtype` can be an endpoint of `rel`. Walks
    /// ignore direction, so either endpoint counts.
    pub fn touches(&self, vtype: VertexTypeId, rel: RelId) -> bool {
        let r = &self.relations[rel.index()];
        r.src == vtype || r.dst == vtype
    }

    pub fn permitted_relations(&self, vtype: VertexTypeId) -> Vec<RelId> {
        self.relations()
            .filter(|(_, r)| r.src == vtype || r.dst == vtype)
            .map(|(id, _)| id)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BILINGUAL: &str = "\
# bilingual scholarly graph
V P_s
V P_t
V K_s
V K_t
R semantic P_s P_t
R cite_s P_s P_s
R cite_t P_t P_t
R cite_x P_s P_t
R kw_s P_s K_s
R kw_t P_t K_t
R kwcite_s K_s K_s
R kwcite_t K_t K_t
R kwcite_x K_s K_t
R translate K_s K_t
";

    #[test]
    fn bilingual_schema_has_four_types_and_ten_relations() {
        let s = GraphSchema::parse(BILINGUAL, "t").unwrap();
        assert_eq!(s.vertex_type_count(), 4);
        assert_eq!(s.relation_count(), 10);
        let ps = s.vertex_type("P_s").unwrap();
        let pt = s.vertex_type("P_t").unwrap();
        assert!(s.permits(ps, s.relation("cite_x").unwrap(), pt));
        assert!(!s.permits(pt, s.relation("cite_x").unwrap(), ps));
        let ks = s.vertex_type("K_s").unwrap();
        assert!(!s.touches(ks, s.relation("cite_s").unwrap()));
        assert_eq!(s.permitted_relations(ks).len(), 4);
    }

    #[test]
    fn homogeneous_schema_is_rejected() {
        let err = GraphSchema::parse("V paper\nR cites paper paper\n", "t").unwrap_err();
        assert!(err.to_string().contains("not heterogeneous"), "{err}");
    }

    #[test]
    fn unknown_type_reference_is_rejected() {
        let err = GraphSchema::parse("V a\nV b\nR r a c\n", "t").unwrap_err();
        assert!(err.to_string().contains("unknown vertex type `c`"), "{err}");
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn duplicates_and_empty_are_rejected() {
        assert!(GraphSchema::parse("V a\nV a\nV b\n", "t").is_err());
        assert!(GraphSchema::parse("V a\nV b\nR r a b\nR r b a\n", "t").is_err());
        let err = GraphSchema::parse("# nothing\n", "t").unwrap_err();
        assert!(err.to_string().contains("empty schema"));
        assert!(GraphSchema::parse("V a\nX b\n", "t").is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = GraphSchema::parse(BILINGUAL, "t").unwrap();
        let again = GraphSchema::parse(&s.to_text(), "t").unwrap();
        assert_eq!(s, again);
    }
}

//! Capability implication graph.
//!
//! A `Capability` enumerant that lists other capabilities implicitly
//! declares them. This module turns those lists into a directed graph and
//! reports its non-trivial strongly connected components.

use std::collections::{BTreeSet, HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;

use crate::model::GrammarSpec;
use crate::GrammarError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyReport {
    /// Capability names in grammar file order.
    pub capabilities: Vec<String>,
    /// `(capability, implied capability)` pairs in file order.
    pub edges: Vec<(String, String)>,
    /// Strongly connected components with more than one member. Each
    /// component is sorted, and components are sorted by first member.
    pub cycles: Vec<Vec<String>>,
    adjacency: HashMap<String, Vec<String>>,
}

impl DependencyReport {
    pub fn from_edges<N, E>(nodes: N, edges: E) -> Self
    where
        N: IntoIterator,
        N::Item: Into<String>,
        E: IntoIterator<Item = (String, String)>,
    {
        let mut capabilities: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: String, caps: &mut Vec<String>| -> usize {
            *index.entry(name.clone()).or_insert_with(|| {
                caps.push(name);
                caps.len() - 1
            })
        };
        for n in nodes {
            intern(n.into(), &mut capabilities);
        }
        let edges: Vec<(String, String)> = edges.into_iter().collect();
        let mut graph = DiGraphMap::<usize, ()>::new();
        for i in 0..capabilities.len() {
            graph.add_node(i);
        }
        let mut adjacency: HashMap<String, Vec<String>> = HashMap::new();
        for (from, to) in &edges {
            let a = intern(from.clone(), &mut capabilities);
            let b = intern(to.clone(), &mut capabilities);
            graph.add_edge(a, b, ());
            adjacency.entry(from.clone()).or_default().push(to.clone());
        }

        let mut cycles: Vec<Vec<String>> = tarjan_scc(&graph)
            .into_iter()
            .filter(|scc| scc.len() > 1)
            .map(|scc| {
                let mut names: Vec<String> =
                    scc.into_iter().map(|i| capabilities[i].clone()).collect();
                names.sort();
                names
            })
            .collect();
        cycles.sort();

        DependencyReport {
            capabilities,
            edges,
            cycles,
            adjacency,
        }
    }

    /// Every capability enabled by declaring `declared`, including the
    /// declared ones. Members of a cycle end up implying each other.
    pub fn implied_closure<'a, I>(&self, declared: I) -> BTreeSet<String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<String> = declared.into_iter().map(str::to_string).collect();
        while let Some(cap) = queue.pop_front() {
            if !seen.insert(cap.clone()) {
                continue;
            }
            if let Some(next) = self.adjacency.get(&cap) {
                queue.extend(next.iter().filter(|n| !seen.contains(*n)).cloned());
            }
        }
        seen
    }
}

pub fn capability_dependency_graph(spec: &GrammarSpec) -> Result<DependencyReport, GrammarError> {
    let kind = spec
        .operand_kind("Capability")
        .filter(|k| k.enumerants.is_some())
        .ok_or_else(|| GrammarError::Schema("grammar has no Capability operand kind".into()))?;
    let nodes = kind.enumerants().iter().map(|e| e.name.clone());
    let edges = kind.enumerants().iter().flat_map(|e| {
        e.capabilities
            .iter()
            .map(move |implied| (e.name.clone(), implied.clone()))
    });
    Ok(DependencyReport::from_edges(nodes, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_core_grammar;

    fn fixture(caps: &str) -> GrammarSpec {
        load_core_grammar(&format!(
            r#"{{"instructions":[],"operand_kinds":[
                {{"category":"ValueEnum","kind":"Capability","enumerants":[{caps}]}}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn two_node_cycle() {
        let g = fixture(
            r#"{"enumerant":"A","value":0,"capabilities":["B"]},
               {"enumerant":"B","value":1,"capabilities":["A"]},
               {"enumerant":"C","value":2,"capabilities":["A"]}"#,
        );
        let report = capability_dependency_graph(&g).unwrap();
        assert_eq!(report.cycles, vec![vec!["A".to_string(), "B".to_string()]]);
        let closure = report.implied_closure(["C"]);
        assert_eq!(closure.into_iter().collect::<Vec<_>>(), ["A", "B", "C"]);
    }

    #[test]
    fn chain_has_no_cycle() {
        let g = fixture(
            r#"{"enumerant":"Matrix","value":0},
               {"enumerant":"Shader","value":1,"capabilities":["Matrix"]}"#,
        );
        let report = capability_dependency_graph(&g).unwrap();
        assert!(report.cycles.is_empty());
        assert_eq!(report.edges, vec![("Shader".into(), "Matrix".into())]);
    }

    #[test]
    fn missing_capability_kind() {
        let g = load_core_grammar(r#"{"instructions":[],"operand_kinds":[]}"#).unwrap();
        assert!(matches!(
            capability_dependency_graph(&g),
            Err(GrammarError::Schema(_))
        ));
    }
}

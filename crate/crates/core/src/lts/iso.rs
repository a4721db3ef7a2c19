//! Rooted isomorphism of two labelled graphs by backtracking.

use std::collections::BTreeMap;

use super::{Edge, Lts};

struct Search<'a, L> {
    a: &'a Lts,
    b: &'a Lts,
    la: &'a dyn Fn(&Edge) -> L,
    lb: &'a dyn Fn(&Edge) -> L,
}

#[derive(Clone)]
struct Partial {
    ab: Vec<Option<usize>>,
    ba: Vec<Option<usize>>,
    queue: Vec<usize>,
}

impl<L: Ord + Clone> Search<'_, L> {
    fn labels(&self, edges: &[Edge], f: &dyn Fn(&Edge) -> L) -> BTreeMap<L, Vec<usize>> {
        let mut out: BTreeMap<L, Vec<usize>> = BTreeMap::new();
        for e in edges {
            out.entry(f(e)).or_default().push(e.to);
        }
        for targets in out.values_mut() {
            targets.sort_unstable();
        }
        out
    }

    fn run(&self, mut st: Partial) -> Option<Vec<usize>> {
        while let Some(u) = st.queue.pop() {
            let v = st.ab[u].expect("queued nodes are mapped");
            let ea = self.labels(self.a.out_edges(u), self.la);
            let eb = self.labels(self.b.out_edges(v), self.lb);
            if ea.len() != eb.len()
                || ea
                    .iter()
                    .zip(&eb)
                    .any(|((k1, t1), (k2, t2))| k1 != k2 || t1.len() != t2.len())
            {
                return None;
            }
            for (label, targets) in &ea {
                let candidates = &eb[label];
                for &tu in targets {
                    match st.ab[tu] {
                        Some(tv) => {
                            if !candidates.contains(&tv) {
                                return None;
                            }
                        }
                        None => {
                            let free: Vec<usize> = candidates
                                .iter()
                                .copied()
                                .filter(|&tv| st.ba[tv].is_none())
                                .collect();
                            if let [tv] = free[..] {
                                st.ab[tu] = Some(tv);
                                st.ba[tv] = Some(tu);
                                st.queue.push(tu);
                                continue;
                            }
                            for &tv in &free {
                                let mut next = st.clone();
                                next.ab[tu] = Some(tv);
                                next.ba[tv] = Some(tu);
                                next.queue.push(tu);
                                next.queue.push(u);
                                if let Some(found) = self.run(next) {
                                    return Some(found);
                                }
                            }
                            return None;
                        }
                    }
                }
            }
        }
        let mapping: Vec<usize> = st.ab.iter().copied().collect::<Option<_>>()?;
        self.edges_match(&mapping).then_some(mapping)
    }

    fn edges_match(&self, mapping: &[usize]) -> bool {
        let mut ea: Vec<(usize, L, usize)> = self
            .a
            .edges()
            .iter()
            .map(|e| (mapping[e.from], (self.la)(e), mapping[e.to]))
            .collect();
        let mut eb: Vec<(usize, L, usize)> = self
            .b
            .edges()
            .iter()
            .map(|e| (e.from, (self.lb)(e), e.to))
            .collect();
        ea.sort();
        eb.sort();
        ea == eb
    }
}

/// Finds a bijection between the nodes of `a` and `b` that maps the initial
/// node to the initial node and every edge to an edge with the same label.
/// `mapping[n]` is the image of node `n` of `a`.
pub fn find_isomorphism<L: Ord + Clone>(
    a: &Lts,
    b: &Lts,
    la: impl Fn(&Edge) -> L,
    lb: impl Fn(&Edge) -> L,
) -> Option<Vec<usize>> {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return None;
    }
    let n = a.node_count();
    let mut st = Partial {
        ab: vec![None; n],
        ba: vec![None; n],
        queue: vec![0],
    };
    st.ab[0] = Some(0);
    st.ba[0] = Some(0);
    Search {
        a,
        b,
        la: &la,
        lb: &lb,
    }
    .run(st)
}

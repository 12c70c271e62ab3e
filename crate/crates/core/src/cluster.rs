//! Splitting data sets into groups that share no live points.
//!
//! Data sets and live points form a bipartite graph, with an edge wherever a
//! point is live for a data set. Its connected components can be advanced
//! independently. Two cheap checks rule out a split without building the
//! graph: fewer than `2 n_live` unique live points, or a superpoint that is
//! live in every data set of the group.
//!
//! Every function here expects its group of data sets to be closed: no live
//! point of the group is live for a data set outside it. Groups of any
//! partition returned by this module satisfy that.

use std::collections::{HashMap, VecDeque};

use crate::sampler::{MembershipTable, PointId, Replacement};

/// Disjoint groups of data sets covering the active ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    /// Each group sorted ascending; groups ordered by their first member.
    pub groups: Vec<Vec<usize>>,
}

impl ClusterPartition {
    fn normalised(mut groups: Vec<Vec<usize>>) -> Self {
        groups.retain(|g| !g.is_empty());
        groups.iter_mut().for_each(|g| g.sort_unstable());
        groups.sort_by_key(|g| g[0]);
        Self { groups }
    }

    /// Whether every group of `finer` lies inside one group of `self`.
    pub fn is_coarsening_of(&self, finer: &ClusterPartition) -> bool {
        let owner: HashMap<usize, usize> = self
            .groups
            .iter()
            .enumerate()
            .flat_map(|(g, ds)| ds.iter().map(move |&d| (d, g)))
            .collect();
        finer.groups.iter().all(|g| {
            let first = owner.get(&g[0]);
            first.is_some() && g.iter().all(|d| owner.get(d) == first)
        })
    }
}

/// Points live in every data set of `group`.
pub fn superpoints(table: &MembershipTable, group: &[usize]) -> Vec<PointId> {
    let Some(&first) = group.first() else {
        return Vec::new();
    };
    let size = group.len() as u32;
    table
        .live_ids(first)
        .filter(|&id| table.multiplicity(id) == size)
        .collect()
}

/// `true` means the group is certainly one cluster; `false` means unknown.
pub fn quick_no_split(table: &MembershipTable, group: &[usize]) -> bool {
    if group.len() < 2 || !superpoints(table, group).is_empty() {
        return true;
    }
    table.unique_live_ids(group).len() < 2 * table.n_live()
}

/// Connected components of the data set / live point graph over `datasets`,
/// found breadth-first.
pub fn partition(table: &MembershipTable, datasets: &[usize]) -> ClusterPartition {
    let mut holders: HashMap<PointId, Vec<usize>> = HashMap::new();
    for &d in datasets {
        for id in table.live_ids(d) {
            holders.entry(id).or_default().push(d);
        }
    }
    let mut seen: HashMap<usize, bool> = datasets.iter().map(|&d| (d, false)).collect();
    let mut groups = Vec::new();
    let mut frontier = VecDeque::new();
    for &start in datasets {
        if seen[&start] {
            continue;
        }
        seen.insert(start, true);
        frontier.push_back(start);
        let mut group = Vec::new();
        while let Some(d) = frontier.pop_front() {
            group.push(d);
            for id in table.live_ids(d) {
                // each point's edges are walked once
                let Some(others) = holders.remove(&id) else {
                    continue;
                };
                for o in others {
                    if let Some(s) = seen.get_mut(&o) {
                        if !*s {
                            *s = true;
                            frontier.push_back(o);
                        }
                    }
                }
            }
        }
        groups.push(group);
    }
    ClusterPartition::normalised(groups)
}

#[derive(Debug, Clone)]
struct Group {
    datasets: Vec<usize>,
    /// Distinct live ids over the group.
    unique: usize,
    /// Iterations since the group was last rebuilt from the graph.
    since_rebuild: usize,
}

/// Lazily maintained partition.
///
/// Groups only ever split: points leave memberships when they die, and new
/// points enter through queues filled by draws inside one group. Between
/// rebuilds a group may therefore be a union of several true components, which
/// is safe. A group is rebuilt when the quick checks fail and at least
/// `rebuild_every` iterations passed since its last rebuild.
#[derive(Debug, Clone)]
pub struct ClusterTracker {
    groups: Vec<Group>,
    group_of: Vec<Option<usize>>,
    rebuild_every: usize,
    n_live: usize,
}

impl ClusterTracker {
    /// Starts with all active data sets in one group; rebuild cadence
    /// defaults to `n_live / 10` iterations.
    pub fn new(table: &MembershipTable) -> Self {
        Self::with_rebuild_every(table, (table.n_live() / 10).max(1))
    }

    pub fn with_rebuild_every(table: &MembershipTable, rebuild_every: usize) -> Self {
        let active = table.active_datasets();
        let mut tracker = Self {
            groups: Vec::new(),
            group_of: vec![None; table.n_datasets()],
            rebuild_every: rebuild_every.max(1),
            n_live: table.n_live(),
        };
        if !active.is_empty() {
            tracker.groups.push(Group {
                unique: table.unique_live_ids(&active).len(),
                datasets: active,
                since_rebuild: 0,
            });
        }
        tracker.reindex();
        tracker
    }

    fn reindex(&mut self) {
        self.group_of.iter_mut().for_each(|g| *g = None);
        for (g, group) in self.groups.iter().enumerate() {
            for &d in &group.datasets {
                self.group_of[d] = Some(g);
            }
        }
    }

    pub fn groups(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(|g| g.datasets.as_slice())
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn partition(&self) -> ClusterPartition {
        ClusterPartition::normalised(self.groups.iter().map(|g| g.datasets.clone()).collect())
    }

    /// Cached variant of [`quick_no_split`].
    fn quick_no_split(&self, table: &MembershipTable, g: usize) -> bool {
        let group = &self.groups[g];
        group.datasets.len() < 2
            || group.unique < 2 * self.n_live
            || !superpoints(table, &group.datasets).is_empty()
    }

    /// Applies one iteration's replacements and retirements, then rebuilds
    /// groups that may have come apart. Returns whether any group split.
    pub fn maintain(
        &mut self,
        table: &MembershipTable,
        replacements: &[Replacement],
        retired: &[usize],
    ) -> bool {
        let mut touched = vec![false; self.groups.len()];
        for r in replacements {
            let Some(g) = self.group_of[r.dataset] else {
                continue;
            };
            let group = &mut self.groups[g];
            group.unique =
                group.unique + usize::from(r.promoted_new) - usize::from(r.dead_vanished);
            touched[g] = true;
        }
        for &d in retired {
            if let Some(g) = self.group_of[d].take() {
                let group = &mut self.groups[g];
                group.datasets.retain(|&x| x != d);
                group.unique = table.unique_live_ids(&group.datasets).len();
            }
        }
        for (g, t) in touched.into_iter().enumerate() {
            if t {
                self.groups[g].since_rebuild += 1;
            }
        }

        let mut split = false;
        let mut next = Vec::with_capacity(self.groups.len());
        for g in 0..self.groups.len() {
            if self.groups[g].datasets.is_empty() {
                continue;
            }
            let due = self.groups[g].since_rebuild >= self.rebuild_every;
            if !due || self.quick_no_split(table, g) {
                next.push(self.groups[g].clone());
                continue;
            }
            let parts = partition(table, &self.groups[g].datasets);
            split |= parts.groups.len() > 1;
            for datasets in parts.groups {
                next.push(Group {
                    unique: table.unique_live_ids(&datasets).len(),
                    datasets,
                    since_rebuild: 0,
                });
            }
        }
        self.groups = next;
        self.reindex();
        split
    }
}

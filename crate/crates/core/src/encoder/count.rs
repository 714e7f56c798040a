use serde::Serialize;

use crate::tree::HyperplaneTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeRole {
    Objective,
    Inequality,
    Equality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AuxCounts {
    pub binaries: usize,
    pub continuous: usize,
    /// Worst-case disjunctive row count for trees of the given depths.
    pub rows: usize,
}

/// Auxiliary variable counts of the disjunctive encodings:
///
/// * binaries `|L_f| + Σ|L_{i,1}| + Σ|L_j|`
/// * continuous `1 + |L_f|(p_f + 1) + Σ|L_{i,1}| p_i + Σ|L_j| p_j`
/// * rows `2^{d_f}(d_f + 1) + 3 + Σ(2^{d_i} − 1) d_i + Σ 2^{d_j} d_j + 2|I| + 4|J|`,
///   where the objective term is present only with an objective tree. An
///   equality disjunction spans feasible and infeasible leaves, so its worst
///   case is a full `2^{d_j}` paths.
pub fn count_aux(trees: &[(TreeRole, &HyperplaneTree)]) -> AuxCounts {
    let mut c = AuxCounts {
        binaries: 0,
        continuous: 1,
        rows: 0,
    };
    for (role, t) in trees {
        let p = t.dim;
        let d = t.depth() as u32;
        match role {
            TreeRole::Objective => {
                let l = t.leaf_count();
                c.binaries += l;
                c.continuous += l * (p + 1);
                c.rows += (1usize << d) * (d as usize + 1) + 3;
            }
            TreeRole::Inequality => {
                let l = t.feasible_leaves().len();
                c.binaries += l;
                c.continuous += l * p;
                c.rows += ((1usize << d) - 1) * d as usize + 2;
            }
            TreeRole::Equality => {
                let l = t.leaf_count();
                c.binaries += l;
                c.continuous += l * p;
                c.rows += (1usize << d) * d as usize + 4;
            }
        }
    }
    c
}

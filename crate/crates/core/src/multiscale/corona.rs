//! Corona decomposition: bad cubes, coherent trees with the two-level angle
//! rule, tree types I-IV and the per-cube localized permutation sums.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{angle_between, angle_to_vertical};
use crate::kernels::KernelId;
use crate::measures::DiscreteMeasure;
use crate::multiscale::cubes::CubeLattice;
use crate::multiscale::params::ParamsLedger;
use crate::statistics::{triple_sum, TripleSumOptions};
use crate::summation::NeumaierSum;

/// Tree types of the corona decomposition, in the order they are tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TreeType {
    I,
    II,
    III,
    IV,
}

/// A coherent stopping-time region of cubes.
#[derive(Debug, Clone, Serialize)]
pub struct Tree {
    /// Lattice index of the root cube `Q_S`.
    pub root: usize,
    /// Lattice indices of all member cubes (root included).
    pub members: Vec<usize>,
    /// Angle budget `alpha(S)` chosen by the two-level rule.
    pub alpha: f64,
    /// Members whose growth stopped because a child is bad.
    pub stop_beta: Vec<usize>,
    /// Members whose growth stopped by the angle rule.
    pub stop_alpha: Vec<usize>,
}

impl Tree {
    /// Minimal cubes stopped by a rule (lattice-truncation leaves are not
    /// stop cubes).
    pub fn stops(&self) -> impl Iterator<Item = usize> + '_ {
        self.stop_beta.iter().chain(self.stop_alpha.iter()).copied()
    }
}

/// The output of `corona_decompose`.
#[derive(Debug, Clone)]
pub struct CoronaDecomposition {
    /// Lattice indices of the bad cubes (`beta_1(Q) > eps`).
    pub bad: Vec<usize>,
    pub trees: Vec<Tree>,
    /// For every lattice cube, the tree that claimed it (None for bad cubes).
    pub tree_of: Vec<Option<usize>>,
}

/// Greedy top-down corona decomposition.
///
/// Bad cubes are those with `beta_1(Q) > eps`. Trees grow from unclaimed
/// good cubes in generation-then-grid order; a member keeps its children
/// when they are all good and all within `alpha(S)/2` of the root line, and
/// stops otherwise (`stop_beta` when a child is bad, `stop_alpha` when the
/// angle rule fires). The margin keeps every member within `alpha(S)` of
/// the root line.
pub fn corona_decompose(
    lattice: &CubeLattice,
    params: &ParamsLedger,
) -> Result<CoronaDecomposition> {
    params.validate()?;
    let n = lattice.cubes.len();
    let bad_flag: Vec<bool> = lattice.cubes.iter().map(|c| c.beta1 > params.eps).collect();
    let mut tree_of: Vec<Option<usize>> = vec![None; n];
    let mut trees: Vec<Tree> = Vec::new();

    for j in lattice.j_min..=lattice.j_max {
        for qi in lattice.generation_indices(j) {
            if bad_flag[qi] || tree_of[qi].is_some() {
                continue;
            }
            let tree_idx = trees.len();
            let root_line = lattice.cubes[qi].line;
            let alpha = if angle_to_vertical(&root_line) > params.theta0 {
                params.theta0 / 10.0
            } else {
                10.0 * params.theta0
            };
            let mut tree = Tree {
                root: qi,
                members: Vec::new(),
                alpha,
                stop_beta: Vec::new(),
                stop_alpha: Vec::new(),
            };
            let mut queue = std::collections::VecDeque::from([qi]);
            tree_of[qi] = Some(tree_idx);
            while let Some(q) = queue.pop_front() {
                tree.members.push(q);
                let children = &lattice.cubes[q].children;
                if children.is_empty() {
                    // Lattice truncation, not a rule stop.
                    continue;
                }
                if children.iter().any(|&c| bad_flag[c]) {
                    tree.stop_beta.push(q);
                    continue;
                }
                let angle_fires = children.iter().any(|&c| {
                    angle_between(&lattice.cubes[c].line, &root_line) >= alpha / 2.0
                });
                if angle_fires {
                    tree.stop_alpha.push(q);
                    continue;
                }
                for &c in children {
                    tree_of[c] = Some(tree_idx);
                    queue.push_back(c);
                }
            }
            trees.push(tree);
        }
    }

    let bad: Vec<usize> = (0..n).filter(|&i| bad_flag[i]).collect();
    Ok(CoronaDecomposition {
        bad,
        trees,
        tree_of,
    })
}

/// Classification summary of one tree.
#[derive(Debug, Clone, Serialize)]
pub struct TreeClassification {
    pub tree_type: TreeType,
    pub root_mass: f64,
    pub stop_mass: f64,
    pub stop_beta_mass: f64,
    pub stop_alpha_mass: f64,
}

/// Evaluate the four mutually exclusive type conditions in order:
/// I when at least half the root mass survives below the stop cubes,
/// II when the bad-child stops carry a quarter of the root mass,
/// III / IV by the same quarter rule on angle stops, split on the vertical
/// angle of the root line.
pub fn classify_trees(
    decomp: &CoronaDecomposition,
    lattice: &CubeLattice,
    params: &ParamsLedger,
) -> Vec<TreeClassification> {
    decomp
        .trees
        .iter()
        .map(|tree| {
            let root_mass = lattice.cubes[tree.root].mass;
            let stop_beta_mass: f64 = tree.stop_beta.iter().map(|&q| lattice.cubes[q].mass).sum();
            let stop_alpha_mass: f64 =
                tree.stop_alpha.iter().map(|&q| lattice.cubes[q].mass).sum();
            let stop_mass = stop_beta_mass + stop_alpha_mass;
            let survives = root_mass - stop_mass;
            let tree_type = if survives >= 0.5 * root_mass {
                TreeType::I
            } else if stop_beta_mass >= 0.25 * root_mass {
                TreeType::II
            } else if angle_to_vertical(&lattice.cubes[tree.root].line) > params.theta0 {
                TreeType::III
            } else {
                TreeType::IV
            };
            TreeClassification {
                tree_type,
                root_mass,
                stop_mass,
                stop_beta_mass,
                stop_alpha_mass,
            }
        })
        .collect()
}

/// Localized permutation sum of a cube: all three points in `3Q`, all
/// pairwise separations inside the dyadic band
/// `[side/c_band, c_band * side]`.
pub fn tree_p_sum(
    kernel: KernelId,
    mu: &DiscreteMeasure,
    lattice: &CubeLattice,
    cube_idx: usize,
    c_band: f64,
) -> Result<f64> {
    let cube = &lattice.cubes[cube_idx];
    let ell = cube.side();
    let idx = lattice.neighborhood(mu, cube, 3.0);
    if idx.len() < 3 {
        return Ok(0.0);
    }
    let local = mu.restrict_to_indices(&idx)?;
    let opts = TripleSumOptions {
        sep_range: Some((ell / c_band, c_band * ell)),
        ..Default::default()
    };
    Ok(triple_sum(kernel, &local, &opts)?.value)
}

/// Sum of `tree_p_sum` over the members of a tree, the type-III diagnostic
/// compared against the root mass.
pub fn tree_p_total(
    kernel: KernelId,
    mu: &DiscreteMeasure,
    lattice: &CubeLattice,
    tree: &Tree,
    c_band: f64,
) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    for &q in &tree.members {
        acc.add(tree_p_sum(kernel, mu, lattice, q, c_band)?);
    }
    Ok(acc.value())
}

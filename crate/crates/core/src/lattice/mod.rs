//! Lattice geometries, j1/j2 bond sets, checkerboard gate layers and spatial
//! symmetry groups.
//!
//! Sites are indexed row-major over (axis-1, axis-2): `x * L2 + y` for square
//! and triangular lattices. Hexagonal lattices use two-site unit cells and
//! index `2 * (x * L2 + y) + sublattice`.
//!
//! The triangular lattice is the square lattice with one diagonal, (1, 1),
//! carrying the j2 coupling; at j2 = j1 it is the isotropic triangular
//! lattice. The other diagonal is kept as a zero-coupling filler family so the
//! square checkerboard decomposition applies unchanged.

mod symmetry;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use symmetry::{symmetry_group, Irrep, Permutation, SymmetryGroup, SymmetrySelection};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Square,
    Triangular,
    Hexagonal,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Square => "square",
            Geometry::Triangular => "triangular",
            Geometry::Hexagonal => "hexagonal",
        })
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "sq" => Ok(Geometry::Square),
            "triangular" | "tri" | "tr" => Ok(Geometry::Triangular),
            "hexagonal" | "hex" | "honeycomb" => Ok(Geometry::Hexagonal),
            other => Err(Error::InvalidLattice(format!("unknown geometry '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "open" | "obc" => Ok(Boundary::Open),
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            other => Err(Error::InvalidLattice(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Cluster geometry. `extents` count sites (square, triangular) or unit cells
/// (hexagonal) along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub geometry: Geometry,
    pub extents: [usize; 2],
    pub boundary: [Boundary; 2],
}

/// Largest cluster the bit-indexed state vectors support.
pub const MAX_SITES: usize = 30;

impl LatticeSpec {
    pub fn new(geometry: Geometry, extents: [usize; 2], boundary: [Boundary; 2]) -> Result<Self> {
        let spec = LatticeSpec { geometry, extents, boundary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn square(l1: usize, l2: usize, boundary: [Boundary; 2]) -> Result<Self> {
        Self::new(Geometry::Square, [l1, l2], boundary)
    }

    pub fn validate(&self) -> Result<()> {
        if self.extents.contains(&0) {
            return Err(Error::InvalidLattice(format!("zero extent in {:?}", self.extents)));
        }
        let n = self.site_count();
        if n < 2 {
            return Err(Error::InvalidLattice("at least two sites are required".into()));
        }
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidLattice(format!("{n} sites: an odd cluster has no perfect dimer covering")));
        }
        if n > MAX_SITES {
            return Err(Error::InvalidLattice(format!("{n} sites exceeds the {MAX_SITES}-site limit")));
        }
        Ok(())
    }

    pub fn sublattices(&self) -> usize {
        match self.geometry {
            Geometry::Hexagonal => 2,
            _ => 1,
        }
    }

    /// N, the number of sites (= qubits).
    pub fn site_count(&self) -> usize {
        self.extents[0] * self.extents[1] * self.sublattices()
    }

    pub fn site(&self, x: usize, y: usize, s: usize) -> usize {
        (x * self.extents[1] + y) * self.sublattices() + s
    }

    pub fn coords(&self, site: usize) -> (usize, usize, usize) {
        let nsub = self.sublattices();
        let cell = site / nsub;
        (cell / self.extents[1], cell % self.extents[1], site % nsub)
    }

    /// Moves `c` by `d` along `axis`, wrapping on periodic axes.
    pub(crate) fn shift(&self, axis: usize, c: usize, d: i64) -> Option<usize> {
        let l = self.extents[axis] as i64;
        let t = c as i64 + d;
        match self.boundary[axis] {
            Boundary::Periodic => Some(t.rem_euclid(l) as usize),
            Boundary::Open => (0..l).contains(&t).then_some(t as usize),
        }
    }

    /// Short human-readable label such as `square 4x4 open/periodic`.
    pub fn label(&self) -> String {
        format!("{} {}x{} {}/{}", self.geometry, self.extents[0], self.extents[1], self.boundary[0], self.boundary[1])
    }
}

/// Bond classes of the Heisenberg Hamiltonian plus the zero-coupling fillers
/// that only exist as circuit gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondClass {
    J1,
    J2,
    Filler,
}

/// One translation-invariant family of bonds: site `(x, y, from)` couples to
/// `(x + dx, y + dy, to)`.
#[derive(Debug, Clone, Copy)]
struct BondFamily {
    dx: i64,
    dy: i64,
    /// (from, to) sublattice combinations sharing this displacement.
    subs: &'static [(usize, usize)],
    class: BondClass,
    /// Axis whose coordinate parity splits the family into disjoint layers;
    /// `None` when the family is already a matching.
    step_axis: Option<usize>,
}

const fn fam(
    dx: i64,
    dy: i64,
    subs: &'static [(usize, usize)],
    class: BondClass,
    step_axis: Option<usize>,
) -> BondFamily {
    BondFamily { dx, dy, subs, class, step_axis }
}

const SAME: &[(usize, usize)] = &[(0, 0)];
const AB: &[(usize, usize)] = &[(0, 1)];
const BOTH: &[(usize, usize)] = &[(0, 0), (1, 1)];

// Checkerboard order: horizontal (axis-2) j1, vertical (axis-1) j1, then the
// two diagonals.
const SQUARE_FAMILIES: [BondFamily; 4] = [
    fam(0, 1, SAME, BondClass::J1, Some(1)),
    fam(1, 0, SAME, BondClass::J1, Some(0)),
    fam(1, 1, SAME, BondClass::J2, Some(0)),
    fam(1, -1, SAME, BondClass::J2, Some(0)),
];

const TRIANGULAR_FAMILIES: [BondFamily; 4] = [
    fam(0, 1, SAME, BondClass::J1, Some(1)),
    fam(1, 0, SAME, BondClass::J1, Some(0)),
    fam(1, 1, SAME, BondClass::J2, Some(0)),
    fam(1, -1, SAME, BondClass::Filler, Some(0)),
];

// Honeycomb: A(x, y) couples to B(x, y), B(x - 1, y) and B(x, y - 1); the
// next-nearest neighbours sit on the same sublattice along a1, a2 and a1 - a2.
const HEXAGONAL_FAMILIES: [BondFamily; 6] = [
    fam(0, 0, AB, BondClass::J1, None),
    fam(-1, 0, AB, BondClass::J1, None),
    fam(0, -1, AB, BondClass::J1, None),
    fam(1, 0, BOTH, BondClass::J2, Some(0)),
    fam(0, 1, BOTH, BondClass::J2, Some(1)),
    fam(1, -1, BOTH, BondClass::J2, Some(0)),
];

fn families(geometry: Geometry) -> &'static [BondFamily] {
    match geometry {
        Geometry::Square => &SQUARE_FAMILIES,
        Geometry::Triangular => &TRIANGULAR_FAMILIES,
        Geometry::Hexagonal => &HEXAGONAL_FAMILIES,
    }
}

/// Ordered site pair with `0 <= i < j < N`.
pub type Bond = (usize, usize);

fn ordered(a: usize, b: usize) -> Bond {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A bond produced by a family, tagged with its checkerboard parity class.
struct FamilyBond {
    bond: Bond,
    parity: usize,
}

fn family_bonds(spec: &LatticeSpec, family: &BondFamily) -> Vec<FamilyBond> {
    let [l1, l2] = spec.extents;
    let mut out = Vec::new();
    for &(from, to) in family.subs {
        for x in 0..l1 {
            for y in 0..l2 {
                let (Some(tx), Some(ty)) = (spec.shift(0, x, family.dx), spec.shift(1, y, family.dy)) else {
                    continue;
                };
                let a = spec.site(x, y, from);
                let b = spec.site(tx, ty, to);
                if a == b {
                    continue;
                }
                let parity = match family.step_axis {
                    None => 0,
                    Some(axis) => {
                        let c = if axis == 0 { x } else { y };
                        let l = spec.extents[axis];
                        let d = if axis == 0 { family.dx } else { family.dy };
                        let wraps = spec.boundary[axis] == Boundary::Periodic && l % 2 == 1 && c == l - 1 && d != 0;
                        if wraps {
                            2
                        } else {
                            c % 2
                        }
                    }
                };
                out.push(FamilyBond { bond: ordered(a, b), parity });
            }
        }
    }
    out
}

/// Hamiltonian bonds of a cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondSet {
    pub site_count: usize,
    pub j1_bonds: Vec<Bond>,
    pub j2_bonds: Vec<Bond>,
}

impl BondSet {
    pub fn all(&self) -> impl Iterator<Item = (Bond, BondClass)> + '_ {
        self.j1_bonds.iter().map(|&b| (b, BondClass::J1)).chain(self.j2_bonds.iter().map(|&b| (b, BondClass::J2)))
    }

    pub fn len(&self) -> usize {
        self.j1_bonds.len() + self.j2_bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nearest (j1) and next-nearest (j2) bonds for the geometry and boundary
/// conditions. Bonds that coincide on small periodic clusters are kept once.
pub fn build_lattice(spec: &LatticeSpec) -> Result<BondSet> {
    spec.validate()?;
    let mut seen = BTreeSet::new();
    let mut j1 = Vec::new();
    let mut j2 = Vec::new();
    for class in [BondClass::J1, BondClass::J2] {
        for family in families(spec.geometry).iter().filter(|f| f.class == class) {
            for fb in family_bonds(spec, family) {
                if seen.insert(fb.bond) {
                    match class {
                        BondClass::J1 => j1.push(fb.bond),
                        _ => j2.push(fb.bond),
                    }
                }
            }
        }
    }
    j1.sort_unstable();
    j2.sort_unstable();
    if j1.is_empty() {
        return Err(Error::InvalidLattice(format!("{} has no j1 bonds", spec.label())));
    }
    Ok(BondSet { site_count: spec.site_count(), j1_bonds: j1, j2_bonds: j2 })
}

/// One checkerboard layer: disjoint site pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub class: BondClass,
    pub pairs: Vec<Bond>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDecomposition {
    pub site_count: usize,
    pub layers: Vec<Layer>,
}

impl LayerDecomposition {
    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.pairs.len()).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = Bond> + '_ {
        self.layers.iter().flat_map(|l| l.pairs.iter().copied())
    }
}

/// Splits every bond family (including triangular fillers) into layers of
/// disjoint pairs by the parity of the stepping coordinate. Each bond appears
/// in exactly one layer; layers left empty by open boundaries are dropped.
pub fn checkerboard_layers(spec: &LatticeSpec) -> Result<LayerDecomposition> {
    build_lattice(spec)?;
    let mut seen = BTreeSet::new();
    let mut layers = Vec::new();
    for family in families(spec.geometry) {
        let bonds = family_bonds(spec, family);
        for parity in 0..3 {
            let mut pairs: Vec<Bond> =
                bonds.iter().filter(|fb| fb.parity == parity).map(|fb| fb.bond).filter(|b| seen.insert(*b)).collect();
            if pairs.is_empty() {
                continue;
            }
            pairs.sort_unstable();
            layers.push(Layer { class: family.class, pairs });
        }
    }
    for layer in &layers {
        let mut used = BTreeSet::new();
        for &(i, j) in &layer.pairs {
            if !used.insert(i) || !used.insert(j) {
                return Err(Error::InvalidLattice(format!("checkerboard layer is not disjoint for {}", spec.label())));
            }
        }
    }
    Ok(LayerDecomposition { site_count: spec.site_count(), layers })
}

/// Which bonds the starting dimer product state pairs up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimerAlignment {
    /// Nearest-neighbour dimers (axis-1 columns on square/triangular lattices,
    /// intra-cell bonds on the honeycomb).
    J1,
    /// Dimers along the j2 diagonal.
    J2,
    /// Sites `(2i, 2i + 1)`.
    Sequential,
}

/// Perfect matching used as the dimer starting state.
pub fn dimer_pairs(spec: &LatticeSpec, alignment: DimerAlignment) -> Result<Vec<Bond>> {
    spec.validate()?;
    let n = spec.site_count();
    let [l1, l2] = spec.extents;
    let pairs: Vec<Bond> = match (spec.geometry, alignment) {
        (_, DimerAlignment::Sequential) | (Geometry::Hexagonal, DimerAlignment::J1) => {
            (0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect()
        }
        (Geometry::Hexagonal, DimerAlignment::J2) => {
            return Err(Error::InvalidLattice("j2-aligned dimers are not defined on the honeycomb".into()))
        }
        (_, DimerAlignment::J1) => {
            if l1 % 2 == 0 {
                (0..l1 / 2)
                    .flat_map(|h| (0..l2).map(move |y| (h, y)))
                    .map(|(h, y)| (spec.site(2 * h, y, 0), spec.site(2 * h + 1, y, 0)))
                    .collect()
            } else {
                (0..l1)
                    .flat_map(|x| (0..l2 / 2).map(move |h| (x, h)))
                    .map(|(x, h)| (spec.site(x, 2 * h, 0), spec.site(x, 2 * h + 1, 0)))
                    .collect()
            }
        }
        (_, DimerAlignment::J2) => {
            if l1 % 2 != 0 || spec.boundary[1] != Boundary::Periodic {
                return Err(Error::InvalidLattice(format!(
                    "j2-aligned dimers need an even axis-1 extent and a periodic axis 2 ({})",
                    spec.label()
                )));
            }
            (0..l1 / 2)
                .flat_map(|h| (0..l2).map(move |y| (h, y)))
                .map(|(h, y)| {
                    let ty = spec.shift(1, y, 1).expect("periodic axis");
                    ordered(spec.site(2 * h, y, 0), spec.site(2 * h + 1, ty, 0))
                })
                .collect()
        }
    };
    let mut used = vec![false; n];
    for &(i, j) in &pairs {
        if i == j || used[i] || used[j] {
            return Err(Error::InvalidLattice(format!("dimer pattern is not a matching for {}", spec.label())));
        }
        used[i] = true;
        used[j] = true;
    }
    if used.iter().any(|u| !u) {
        return Err(Error::InvalidLattice(format!("dimer pattern does not cover {}", spec.label())));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Boundary::{Open, Periodic};

    fn sq(l1: usize, l2: usize, b: [Boundary; 2]) -> LatticeSpec {
        LatticeSpec::square(l1, l2, b).unwrap()
    }

    #[test]
    fn square_4x4_periodic_bond_counts() {
        let b = build_lattice(&sq(4, 4, [Periodic, Periodic])).unwrap();
        assert_eq!(b.j1_bonds.len(), 32);
        assert_eq!(b.j2_bonds.len(), 32);
    }

    #[test]
    fn square_4x4_open_periodic_bond_counts() {
        let b = build_lattice(&sq(4, 4, [Open, Periodic])).unwrap();
        assert_eq!(b.j1_bonds.len(), 28);
        assert_eq!(b.j2_bonds.len(), 24);
    }

    #[test]
    fn two_site_chain() {
        let b = build_lattice(&sq(1, 2, [Open, Open])).unwrap();
        assert_eq!(b.j1_bonds, vec![(0, 1)]);
        assert!(b.j2_bonds.is_empty());
    }

    #[test]
    fn odd_cluster_rejected() {
        let err = LatticeSpec::square(3, 3, [Periodic, Periodic]).unwrap_err();
        assert!(err.to_string().contains("odd"), "{err}");
    }

    #[test]
    fn square_4x4_has_eight_full_layers() {
        let spec = sq(4, 4, [Periodic, Periodic]);
        let d = checkerboard_layers(&spec).unwrap();
        assert_eq!(d.layers.len(), 8);
        assert!(d.layers.iter().all(|l| l.pairs.len() == 8));
        assert_eq!(d.gate_count(), 64);
        let bonds = build_lattice(&spec).unwrap();
        let mut all: Vec<Bond> = bonds.all().map(|(b, _)| b).collect();
        let mut layered: Vec<Bond> = d.pairs().collect();
        all.sort_unstable();
        layered.sort_unstable();
        assert_eq!(all, layered);
        // horizontal j1, vertical j1, then diagonals
        let classes: Vec<BondClass> = d.layers.iter().map(|l| l.class).collect();
        assert_eq!(&classes[..4], &[BondClass::J1; 4]);
        assert_eq!(&classes[4..], &[BondClass::J2; 4]);
    }

    #[test]
    fn layers_are_disjoint_for_small_clusters() {
        for spec in [
            sq(2, 2, [Periodic, Periodic]),
            sq(2, 3, [Periodic, Periodic]),
            sq(2, 4, [Open, Periodic]),
            sq(3, 4, [Open, Periodic]),
            LatticeSpec::new(Geometry::Triangular, [2, 4], [Periodic, Periodic]).unwrap(),
            LatticeSpec::new(Geometry::Hexagonal, [2, 2], [Periodic, Periodic]).unwrap(),
            LatticeSpec::new(Geometry::Hexagonal, [3, 3], [Periodic, Periodic]).unwrap(),
        ] {
            let d = checkerboard_layers(&spec).unwrap();
            for layer in &d.layers {
                let mut sites: Vec<usize> = layer.pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
                let n = sites.len();
                sites.sort_unstable();
                sites.dedup();
                assert_eq!(sites.len(), n, "{}", spec.label());
            }
        }
    }

    #[test]
    fn triangular_layers_include_fillers() {
        let spec = LatticeSpec::new(Geometry::Triangular, [4, 4], [Periodic, Periodic]).unwrap();
        let bonds = build_lattice(&spec).unwrap();
        assert_eq!(bonds.j1_bonds.len(), 32);
        assert_eq!(bonds.j2_bonds.len(), 16);
        let d = checkerboard_layers(&spec).unwrap();
        assert_eq!(d.layers.len(), 8);
        assert_eq!(d.layers.iter().filter(|l| l.class == BondClass::Filler).count(), 2);
        assert!(d.layers.iter().all(|l| l.pairs.len() == 8));
    }

    #[test]
    fn hexagonal_bonds_cover_coordination() {
        let spec = LatticeSpec::new(Geometry::Hexagonal, [3, 3], [Periodic, Periodic]).unwrap();
        let b = build_lattice(&spec).unwrap();
        assert_eq!(spec.site_count(), 18);
        assert_eq!(b.j1_bonds.len(), 27);
        assert_eq!(b.j2_bonds.len(), 54);
        let d = checkerboard_layers(&spec).unwrap();
        assert_eq!(d.gate_count(), 81);
        // j1 families are perfect matchings
        assert!(d.layers.iter().take(3).all(|l| l.class == BondClass::J1 && l.pairs.len() == 9));
    }

    #[test]
    fn open_layers_drop_out_of_lattice_pairs() {
        let spec = sq(2, 4, [Open, Periodic]);
        let d = checkerboard_layers(&spec).unwrap();
        let b = build_lattice(&spec).unwrap();
        assert_eq!(b.j1_bonds.len(), 12);
        assert_eq!(b.j2_bonds.len(), 8);
        assert_eq!(d.gate_count(), 20);
        assert_eq!(d.layers.len(), 5);
    }

    #[test]
    fn dimer_patterns_are_matchings() {
        let spec = sq(2, 4, [Open, Periodic]);
        assert_eq!(dimer_pairs(&spec, DimerAlignment::J1).unwrap(), vec![(0, 4), (1, 5), (2, 6), (3, 7)]);
        let tri = LatticeSpec::new(Geometry::Triangular, [2, 4], [Periodic, Periodic]).unwrap();
        let p = dimer_pairs(&tri, DimerAlignment::J2).unwrap();
        let bonds = build_lattice(&tri).unwrap();
        assert!(p.iter().all(|b| bonds.j2_bonds.contains(b)));
        let hex = LatticeSpec::new(Geometry::Hexagonal, [2, 2], [Periodic, Periodic]).unwrap();
        let p = dimer_pairs(&hex, DimerAlignment::J1).unwrap();
        let bonds = build_lattice(&hex).unwrap();
        assert!(p.iter().all(|b| bonds.j1_bonds.contains(b)));
    }
}

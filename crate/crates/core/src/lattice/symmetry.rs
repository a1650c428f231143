use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{build_lattice, Bond, BondSet, Boundary, Geometry, LatticeSpec};
use crate::{Error, Result};

/// Site permutation `k -> g(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidInput(format!("{map:?} is not a bijection")));
            }
        }
        Ok(Permutation(map))
    }

    /// Transposition of sites `i` and `j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut p = Self::identity(n);
        p.0.swap(i, j);
        p
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self, k: usize) -> usize {
        self.0[k]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &g)| i == g)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&k| self.0[k]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (k, &g) in self.0.iter().enumerate() {
            inv[g] = k;
        }
        Permutation(inv)
    }

    fn map_bond(&self, (i, j): Bond) -> Bond {
        let (a, b) = (self.0[i], self.0[j]);
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetrySelection {
    Identity,
    Translations,
    PointGroup,
    Full,
}

impl fmt::Display for SymmetrySelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetrySelection::Identity => "identity",
            SymmetrySelection::Translations => "translations",
            SymmetrySelection::PointGroup => "point_group",
            SymmetrySelection::Full => "full",
        })
    }
}

impl FromStr for SymmetrySelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "identity" | "none" => Ok(SymmetrySelection::Identity),
            "translations" | "tr" => Ok(SymmetrySelection::Translations),
            "point_group" | "pg" => Ok(SymmetrySelection::PointGroup),
            "full" | "all" => Ok(SymmetrySelection::Full),
            other => Err(Error::InvalidInput(format!("unknown symmetry selection '{other}'"))),
        }
    }
}

/// One-dimensional irrep label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Irrep {
    Trivial,
    /// Lattice momentum in units of 2π/L per axis (translations only).
    Momentum(i64, i64),
    /// Explicit characters, one per group element in group order.
    Characters(Vec<Complex64>),
}

/// Spatial symmetry group with the characters of one 1D irrep. Element 0 is
/// always the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    site_count: usize,
    elements: Vec<Permutation>,
    characters: Vec<Complex64>,
}

impl SymmetryGroup {
    pub fn identity(n: usize) -> Self {
        SymmetryGroup {
            site_count: n,
            elements: vec![Permutation::identity(n)],
            characters: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// Group from explicit elements with trivial characters. The identity is
    /// moved to the front.
    pub fn from_elements(n: usize, mut elements: Vec<Permutation>) -> Result<Self> {
        if elements.iter().any(|e| e.len() != n) {
            return Err(Error::InvalidInput("permutation length differs from site count".into()));
        }
        let Some(pos) = elements.iter().position(Permutation::is_identity) else {
            return Err(Error::InvalidInput("group does not contain the identity".into()));
        };
        let id = elements.remove(pos);
        elements.sort();
        elements.dedup();
        elements.insert(0, id);
        let characters = vec![Complex64::new(1.0, 0.0); elements.len()];
        Ok(SymmetryGroup { site_count: n, elements, characters })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn characters(&self) -> &[Complex64] {
        &self.characters
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    /// Whether every character is real (no imaginary parts need measuring).
    pub fn has_real_characters(&self) -> bool {
        self.characters.iter().all(|c| c.im.abs() < 1e-14)
    }

    pub fn index_of(&self, p: &Permutation) -> Option<usize> {
        self.elements.iter().position(|e| e == p)
    }

    /// Replaces the characters; they must form a one-dimensional
    /// representation (unit modulus, multiplicative, identity maps to 1).
    pub fn with_characters(mut self, characters: Vec<Complex64>) -> Result<Self> {
        if characters.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), actual: characters.len() });
        }
        if characters.iter().any(|c| (c.norm() - 1.0).abs() > 1e-8) {
            return Err(Error::InvalidInput("characters must have unit modulus".into()));
        }
        if (characters[0] - 1.0).norm() > 1e-8 {
            return Err(Error::InvalidInput("identity character must be 1".into()));
        }
        self.characters = characters;
        if !self.is_homomorphism(1e-6) {
            return Err(Error::InvalidInput("characters are not a one-dimensional representation".into()));
        }
        Ok(self)
    }

    /// χ(g∘h) = χ(g)χ(h) for all pairs.
    pub fn is_homomorphism(&self, tol: f64) -> bool {
        let index: BTreeMap<&Permutation, usize> = self.elements.iter().enumerate().map(|(i, e)| (e, i)).collect();
        for (a, ga) in self.elements.iter().enumerate() {
            for (b, gb) in self.elements.iter().enumerate() {
                let Some(&c) = index.get(&ga.compose(gb)) else {
                    return false;
                };
                if (self.characters[c] - self.characters[a] * self.characters[b]).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Closure under composition and inverses.
    pub fn is_closed(&self) -> bool {
        let set: HashSet<&Permutation> = self.elements.iter().collect();
        self.elements
            .iter()
            .all(|a| set.contains(&a.inverse()) && self.elements.iter().all(|b| set.contains(&a.compose(b))))
    }

    /// Every element maps the j1 and j2 bond sets onto themselves.
    pub fn preserves(&self, bonds: &BondSet) -> bool {
        let j1: HashSet<Bond> = bonds.j1_bonds.iter().copied().collect();
        let j2: HashSet<Bond> = bonds.j2_bonds.iter().copied().collect();
        self.elements.iter().all(|g| {
            bonds.j1_bonds.iter().all(|&b| j1.contains(&g.map_bond(b)))
                && bonds.j2_bonds.iter().all(|&b| j2.contains(&g.map_bond(b)))
        })
    }
}

/// An affine lattice map `(x, y, s) -> (M (x, y) + t_s, σ(s))` that survived
/// the bond-invariance filter.
#[derive(Debug, Clone)]
struct AffineSymmetry {
    perm: Permutation,
    matrix: [[i64; 2]; 2],
    swaps_sublattice: bool,
    offsets: [[i64; 2]; 2],
}

impl AffineSymmetry {
    fn is_translation(&self) -> bool {
        self.matrix == [[1, 0], [0, 1]] && !self.swaps_sublattice && self.offsets[0] == self.offsets[1]
    }
}

fn unimodular_matrices() -> Vec<[[i64; 2]; 2]> {
    let mut out = Vec::new();
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                for d in -1..=1 {
                    let det: i64 = a * d - b * c;
                    if det.abs() == 1 {
                        out.push([[a, b], [c, d]]);
                    }
                }
            }
        }
    }
    out
}

fn offset_range(spec: &LatticeSpec, axis: usize) -> Vec<i64> {
    let l = spec.extents[axis] as i64;
    match spec.boundary[axis] {
        Boundary::Periodic => (0..l).collect(),
        Boundary::Open => {
            let span = (spec.extents[0] + spec.extents[1]) as i64;
            (-span..=span).collect()
        }
    }
}

fn wrap(spec: &LatticeSpec, axis: usize, v: i64) -> Option<usize> {
    let l = spec.extents[axis] as i64;
    match spec.boundary[axis] {
        Boundary::Periodic => Some(v.rem_euclid(l) as usize),
        Boundary::Open => (0..l).contains(&v).then_some(v as usize),
    }
}

/// All affine automorphisms of the bond-coloured lattice graph.
fn automorphisms(spec: &LatticeSpec, bonds: &BondSet) -> Vec<AffineSymmetry> {
    let n = spec.site_count();
    let nsub = spec.sublattices();
    let j1: HashSet<Bond> = bonds.j1_bonds.iter().copied().collect();
    let j2: HashSet<Bond> = bonds.j2_bonds.iter().copied().collect();
    let offsets: Vec<[i64; 2]> = offset_range(spec, 0)
        .into_iter()
        .flat_map(|a| offset_range(spec, 1).into_iter().map(move |b| [a, b]))
        .collect();
    // One realization per (permutation, linear part): small periodic clusters
    // realize the same permutation through several affine maps.
    let mut seen: HashSet<(Permutation, [[i64; 2]; 2], bool)> = HashSet::new();
    let mut found = Vec::new();
    for m in unimodular_matrices() {
        for swaps in [false, true] {
            if swaps && nsub == 1 {
                continue;
            }
            for t0 in &offsets {
                let t1_choices: &[[i64; 2]] = if nsub == 1 { std::slice::from_ref(t0) } else { &offsets };
                for t1 in t1_choices {
                    let t = [*t0, *t1];
                    let mut map = Vec::with_capacity(n);
                    let mut ok = true;
                    for site in 0..n {
                        let (x, y, s) = spec.coords(site);
                        let (x, y) = (x as i64, y as i64);
                        let nx = m[0][0] * x + m[0][1] * y + t[s][0];
                        let ny = m[1][0] * x + m[1][1] * y + t[s][1];
                        let (Some(nx), Some(ny)) = (wrap(spec, 0, nx), wrap(spec, 1, ny)) else {
                            ok = false;
                            break;
                        };
                        let ns = if swaps { 1 - s } else { s };
                        map.push(spec.site(nx, ny, ns));
                    }
                    if !ok {
                        continue;
                    }
                    let Ok(perm) = Permutation::new(map) else { continue };
                    if seen.contains(&(perm.clone(), m, swaps)) {
                        continue;
                    }
                    let keeps = bonds.j1_bonds.iter().all(|&b| j1.contains(&perm.map_bond(b)))
                        && bonds.j2_bonds.iter().all(|&b| j2.contains(&perm.map_bond(b)));
                    if keeps {
                        seen.insert((perm.clone(), m, swaps));
                        found.push(AffineSymmetry { perm, matrix: m, swaps_sublattice: swaps, offsets: t });
                    }
                }
            }
        }
    }
    found
}

/// Smallest set containing `elements` that is closed under composition. On
/// small clusters the affine maps with entries in {-1, 0, 1} can miss
/// products of two such maps.
fn closure(elements: Vec<Permutation>) -> Vec<Permutation> {
    let mut set: BTreeSet<Permutation> = elements.into_iter().collect();
    loop {
        let current: Vec<&Permutation> = set.iter().collect();
        let fresh: Vec<Permutation> = current
            .iter()
            .flat_map(|a| current.iter().map(move |b| a.compose(b)))
            .filter(|p| !set.contains(p))
            .collect();
        if fresh.is_empty() {
            return set.into_iter().collect();
        }
        set.extend(fresh);
    }
}

/// Whether the element fixes the cluster centre: `(L - 1) / 2` along open
/// axes, the origin along periodic ones. Coordinates are doubled to stay
/// integral.
fn fixes_centre(spec: &LatticeSpec, sym: &AffineSymmetry) -> bool {
    if spec.geometry == Geometry::Hexagonal {
        return sym.perm.image(0) == 0;
    }
    let centre: Vec<i64> = (0..2)
        .map(|a| match spec.boundary[a] {
            Boundary::Open => spec.extents[a] as i64 - 1,
            Boundary::Periodic => 0,
        })
        .collect();
    (0..2).all(|a| {
        let image = sym.matrix[a][0] * centre[0] + sym.matrix[a][1] * centre[1] + 2 * sym.offsets[0][a];
        match spec.boundary[a] {
            Boundary::Open => image == centre[a],
            Boundary::Periodic => (image - centre[a]).rem_euclid(2 * spec.extents[a] as i64) == 0,
        }
    })
}

/// Symmetry group of the requested kind with the characters of `irrep`.
pub fn symmetry_group(spec: &LatticeSpec, selection: SymmetrySelection, irrep: &Irrep) -> Result<SymmetryGroup> {
    let bonds = build_lattice(spec)?;
    let n = spec.site_count();
    let periodic: Vec<bool> = spec.boundary.iter().map(|b| *b == Boundary::Periodic).collect();
    if matches!(selection, SymmetrySelection::Translations | SymmetrySelection::Full) && !periodic.iter().any(|&p| p) {
        return Err(Error::SymmetryRejected(format!(
            "translations need at least one periodic axis ({})",
            spec.label()
        )));
    }
    if spec.geometry == Geometry::Hexagonal && selection != SymmetrySelection::Identity && !periodic.iter().all(|&p| p)
    {
        return Err(Error::SymmetryRejected("honeycomb symmetries require periodic boundaries".into()));
    }

    let syms = match selection {
        SymmetrySelection::Identity => Vec::new(),
        _ => automorphisms(spec, &bonds),
    };
    let chosen: Vec<&AffineSymmetry> = syms
        .iter()
        .filter(|s| match selection {
            SymmetrySelection::Identity => false,
            SymmetrySelection::Translations => s.is_translation(),
            SymmetrySelection::PointGroup => fixes_centre(spec, s),
            SymmetrySelection::Full => true,
        })
        .collect();
    let mut group = if selection == SymmetrySelection::Identity {
        SymmetryGroup::identity(n)
    } else {
        SymmetryGroup::from_elements(n, closure(chosen.iter().map(|s| s.perm.clone()).collect()))?
    };
    if !group.preserves(&bonds) {
        return Err(Error::SymmetryRejected(format!("{selection} does not preserve the bonds of {}", spec.label())));
    }

    match irrep {
        Irrep::Trivial => {}
        Irrep::Momentum(k1, k2) => {
            if selection != SymmetrySelection::Translations {
                return Err(Error::SymmetryRejected("momentum labels apply to the translation group only".into()));
            }
            let by_perm: BTreeMap<&Permutation, &AffineSymmetry> = chosen.iter().map(|s| (&s.perm, *s)).collect();
            let chars = group
                .elements()
                .iter()
                .map(|g| {
                    let t = by_perm.get(g).map(|s| s.offsets[0]).unwrap_or([0, 0]);
                    let phase = 2.0
                        * PI
                        * ((*k1 * t[0]) as f64 / spec.extents[0] as f64 + (*k2 * t[1]) as f64 / spec.extents[1] as f64);
                    Complex64::from_polar(1.0, -phase)
                })
                .collect();
            group = group.with_characters(chars)?;
        }
        Irrep::Characters(chars) => {
            group = group.with_characters(chars.clone())?;
        }
    }
    Ok(group)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary::{Open, Periodic};

    fn sq(l1: usize, l2: usize, b: [Boundary; 2]) -> LatticeSpec {
        LatticeSpec::square(l1, l2, b).unwrap()
    }

    #[test]
    fn square_4x4_group_orders() {
        let spec = sq(4, 4, [Periodic, Periodic]);
        let t = symmetry_group(&spec, SymmetrySelection::Translations, &Irrep::Trivial).unwrap();
        assert_eq!(t.order(), 16);
        assert!(t.characters().iter().all(|c| *c == Complex64::new(1.0, 0.0)));
        let p = symmetry_group(&spec, SymmetrySelection::PointGroup, &Irrep::Trivial).unwrap();
        assert_eq!(p.order(), 8);
        let f = symmetry_group(&spec, SymmetrySelection::Full, &Irrep::Trivial).unwrap();
        assert_eq!(f.order(), 128);
        for g in [&t, &p, &f] {
            assert!(g.elements()[0].is_identity());
            assert!(g.is_closed());
        }
    }

    #[test]
    fn translations_rejected_without_periodic_axis() {
        let spec = sq(2, 4, [Open, Open]);
        let err = symmetry_group(&spec, SymmetrySelection::Translations, &Irrep::Trivial).unwrap_err();
        assert!(matches!(err, Error::SymmetryRejected(_)));
    }

    #[test]
    fn mixed_boundary_groups() {
        let spec = sq(4, 4, [Open, Periodic]);
        let t = symmetry_group(&spec, SymmetrySelection::Translations, &Irrep::Trivial).unwrap();
        assert_eq!(t.order(), 4);
        let p = symmetry_group(&spec, SymmetrySelection::PointGroup, &Irrep::Trivial).unwrap();
        assert_eq!(p.order(), 4);
        let f = symmetry_group(&spec, SymmetrySelection::Full, &Irrep::Trivial).unwrap();
        assert_eq!(f.order(), 16);
        assert!(f.is_closed());
    }

    #[test]
    fn triangular_point_group_keeps_diagonal() {
        let spec = LatticeSpec::new(Geometry::Triangular, [4, 4], [Periodic, Periodic]).unwrap();
        let p = symmetry_group(&spec, SymmetrySelection::PointGroup, &Irrep::Trivial).unwrap();
        assert_eq!(p.order(), 4);
        assert!(p.preserves(&build_lattice(&spec).unwrap()));
    }

    #[test]
    fn honeycomb_groups_close() {
        let spec = LatticeSpec::new(Geometry::Hexagonal, [2, 2], [Periodic, Periodic]).unwrap();
        for sel in [SymmetrySelection::Translations, SymmetrySelection::PointGroup, SymmetrySelection::Full] {
            let g = symmetry_group(&spec, sel, &Irrep::Trivial).unwrap();
            assert!(g.is_closed(), "{sel}");
        }
        let spec = LatticeSpec::new(Geometry::Hexagonal, [3, 3], [Periodic, Periodic]).unwrap();
        let t = symmetry_group(&spec, SymmetrySelection::Translations, &Irrep::Trivial).unwrap();
        assert_eq!(t.order(), 9);
        let p = symmetry_group(&spec, SymmetrySelection::PointGroup, &Irrep::Trivial).unwrap();
        let f = symmetry_group(&spec, SymmetrySelection::Full, &Irrep::Trivial).unwrap();
        assert!(f.is_closed());
        assert_eq!(f.order() % p.order(), 0);
        assert_eq!(f.order(), 9 * 12);
    }

    #[test]
    fn momentum_characters_form_a_representation() {
        let spec = sq(4, 4, [Periodic, Periodic]);
        let g = symmetry_group(&spec, SymmetrySelection::Translations, &Irrep::Momentum(1, 2)).unwrap();
        assert!(g.is_homomorphism(1e-12));
        assert!(!g.has_real_characters());
    }

    #[test]
    fn bad_characters_rejected() {
        let spec = sq(2, 4, [Open, Periodic]);
        let g = symmetry_group(&spec, SymmetrySelection::Translations, &Irrep::Trivial).unwrap();
        let mut chars = vec![Complex64::new(1.0, 0.0); g.order()];
        chars[1] = Complex64::new(-1.0, 0.0);
        chars[2] = Complex64::new(-1.0, 0.0);
        chars[3] = Complex64::new(-1.0, 0.0);
        assert!(g.with_characters(chars).is_err());
    }
}

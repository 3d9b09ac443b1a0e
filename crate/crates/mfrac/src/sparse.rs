//! Stopping-time sparse families.
//!
//! The construction thresholds the grid maximal field at powers of the
//! stopping ratio `a = 2^{(m - alpha/n)(n+1)}`: generation `k` consists of
//! the maximal in-root cubes whose stopping quantity
//! `sigma(Q) = prod_i |Q|^{alpha/(mn)-1} \int_Q f_i` exceeds `a^k`. The
//! generation window runs from the last `k` below the maximal field's
//! minimum positive value (where the level sets have stabilized to the full
//! support) up to the last `k` below its maximum, which makes the
//! level-set decomposition of `\int (M f)^q u` exact over the window.
//!
//! Essential sets `E(Q) = Q minus the next generation` are stored as explicit
//! bit masks over the finest-level cells of the family's grid, so all
//! sparseness invariants are checked with integer arithmetic.

use crate::geometry::{rat_to_f64, LevelRange, Rat, RootSystem, Shift};
use crate::grid::GridFunction;
use crate::pyramid::Pyramid;
use crate::{DyadicCube, Error, ExponentData, Result};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Bit mask over the finest-level cells of one grid inside the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMask {
    words: Vec<u64>,
    bits: usize,
}

impl CellMask {
    pub fn empty(bits: usize) -> CellMask {
        CellMask { words: vec![0; bits.div_ceil(64)], bits }
    }

    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.bits);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersection_count(&self, other: &CellMask) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_disjoint(&self, other: &CellMask) -> bool {
        self.intersection_count(other) == 0
    }

    pub fn or_assign(&mut self, other: &CellMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// `self & !other`.
    pub fn minus(&self, other: &CellMask) -> CellMask {
        CellMask {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
            bits: self.bits,
        }
    }

    pub fn is_subset_of(&self, other: &CellMask) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.bits).filter(move |&i| self.get(i))
    }
}

/// One selected cube with its stopping quantity and essential set.
#[derive(Clone, Debug)]
pub struct SparseCube {
    pub cube: DyadicCube,
    /// Stopping quantity at selection time; `NaN` for hand-built families.
    pub sigma: f64,
    pub e_mask: CellMask,
}

/// Leveled sparse family over one grid.
#[derive(Clone, Debug)]
pub struct SparseFamily {
    system: Arc<RootSystem>,
    shift: Shift,
    /// Finest-level cell lattice of this grid inside the root.
    tmesh: LevelRange,
    generations: BTreeMap<i32, Vec<SparseCube>>,
    /// Stopping ratio used by the builder; `None` for hand-built families.
    stopping_ratio: Option<f64>,
}

/// Named sparseness invariants, in the order they are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparseInvariant {
    /// Cubes of a fixed generation are pairwise disjoint.
    GenerationDisjoint,
    /// Each generation's union contains the next one.
    GammaNested,
    /// The next generation covers at most half of each cube.
    HalfDensity,
    /// Essential sets are pairwise disjoint and fill at least half the cube.
    EssentialSets,
}

#[derive(Clone, Debug)]
pub struct SparseViolation {
    pub invariant: SparseInvariant,
    pub generation: i32,
    pub cube: DyadicCube,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct SparseVerifyReport {
    pub violation: Option<SparseViolation>,
}

impl SparseVerifyReport {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

impl SparseFamily {
    pub fn system(&self) -> &Arc<RootSystem> {
        &self.system
    }

    pub fn shift(&self) -> Shift {
        self.shift
    }

    pub fn stopping_ratio(&self) -> Option<f64> {
        self.stopping_ratio
    }

    pub fn generations(&self) -> &BTreeMap<i32, Vec<SparseCube>> {
        &self.generations
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.generations.values().map(Vec::len).sum()
    }

    /// All member cubes in (generation, index) order; multiset semantics.
    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        self.generations
            .values()
            .flat_map(|g| g.iter().map(|sc| sc.cube.clone()))
    }

    /// Measure of a mask in this family's cell lattice.
    pub fn mask_measure(&self, mask: &CellMask) -> f64 {
        mask.count() as f64 * self.system.cell_volume()
    }

    /// Integral of `g` over a mask (sum of exact per-cell integrals).
    pub fn mask_integral(&self, g: &GridFunction, mask: &CellMask) -> f64 {
        let n = self.system.n();
        let cell_integrals: Vec<f64> = mask
            .iter_ones()
            .map(|flat| {
                let q = self.tmesh.cube(flat);
                let lo: Vec<Rat> = (0..n).map(|i| q.lower(i)).collect();
                let hi: Vec<Rat> = (0..n).map(|i| q.upper(i)).collect();
                g.integral_box(&lo, &hi)
            })
            .collect();
        crate::grid::pairwise_sum(&cell_integrals)
    }

    /// Index box of the finest-level descendants of `q` in the cell lattice.
    fn cube_mask(&self, q: &DyadicCube) -> CellMask {
        let mut mask = CellMask::empty(self.tmesh.count());
        let ell = self.system.max_level();
        let n = q.n();
        // first finest-level descendant, one axis at a time
        let mut first = q.index.clone();
        for lv in q.level..ell {
            for (i, j) in first.iter_mut().enumerate() {
                let e = if q.shift.is_third(i) {
                    if lv.rem_euclid(2) == 0 {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
                *j = 2 * *j + e;
            }
        }
        let width = 1i64 << (ell - q.level);
        let mut idx = first.clone();
        'outer: loop {
            let flat = self.tmesh.flat(&idx).expect("descendants of in-root cubes are in-root");
            mask.set(flat);
            let mut axis = n;
            loop {
                if axis == 0 {
                    break 'outer;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < first[axis] + width {
                    break;
                }
                idx[axis] = first[axis];
            }
        }
        mask
    }

    /// Assemble a family from explicit generations; essential sets are
    /// derived as `Q` minus the union of the next generation.
    pub fn from_generations(
        system: Arc<RootSystem>,
        shift: Shift,
        generations: BTreeMap<i32, Vec<(DyadicCube, f64)>>,
    ) -> Result<SparseFamily> {
        let tmesh = system.level_range(system.max_level(), shift);
        let mut fam = SparseFamily {
            system: system.clone(),
            shift,
            tmesh,
            generations: BTreeMap::new(),
            stopping_ratio: None,
        };
        for (k, cubes) in &generations {
            for (q, _) in cubes {
                if q.shift != shift {
                    return Err(Error::InvalidExponents(format!(
                        "cube {q:?} is not on the family grid"
                    )));
                }
                if !system.contains_cube(q) {
                    return Err(Error::OutOfSystem(format!("{q:?} outside the root")));
                }
                if q.level > system.max_level() {
                    return Err(Error::OutOfSystem(format!(
                        "{q:?} finer than the mesh (generation {k})"
                    )));
                }
            }
        }
        // next generation's union mask, walking generations from the finest
        let keys: Vec<i32> = generations.keys().copied().collect();
        let mut gamma_next = CellMask::empty(fam.tmesh.count());
        for (pos, &k) in keys.iter().enumerate().rev() {
            let next_is_consecutive = keys.get(pos + 1).is_some_and(|&kn| kn == k + 1);
            if !next_is_consecutive {
                gamma_next = CellMask::empty(fam.tmesh.count());
            }
            let mut level: Vec<SparseCube> = Vec::new();
            let mut gamma_here = CellMask::empty(fam.tmesh.count());
            for (q, sigma) in &generations[&k] {
                let box_mask = fam.cube_mask(q);
                gamma_here.or_assign(&box_mask);
                level.push(SparseCube {
                    cube: q.clone(),
                    sigma: *sigma,
                    e_mask: box_mask.minus(&gamma_next),
                });
            }
            level.sort_by(|a, b| a.cube.index.cmp(&b.cube.index));
            fam.generations.insert(k, level);
            gamma_next = gamma_here;
        }
        Ok(fam)
    }

    /// Union mask of one generation.
    fn gamma(&self, k: i32) -> CellMask {
        let mut m = CellMask::empty(self.tmesh.count());
        if let Some(g) = self.generations.get(&k) {
            for sc in g {
                m.or_assign(&self.cube_mask(&sc.cube));
            }
        }
        m
    }

    /// Serialize: a generation header followed by one cube per line as
    /// `t k j1..jn` with `k` the cube's dyadic level, sorted by (k, j).
    pub fn write_text(&self, out: &mut impl Write) -> std::io::Result<()> {
        let n = self.system.n();
        for (gen, cubes) in &self.generations {
            writeln!(out, "# generation {gen}")?;
            let mut sorted: Vec<&SparseCube> = cubes.iter().collect();
            sorted.sort_by_key(|sc| (sc.cube.level, sc.cube.index.clone()));
            for sc in sorted {
                let q = &sc.cube;
                write!(out, "{} {}", q.shift.digits(n), q.level)?;
                for j in &q.index {
                    write!(out, " {j}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Parse the text form. Cubes before any generation header are grouped
    /// by their own dyadic level.
    pub fn read_text(system: Arc<RootSystem>, input: &mut impl BufRead) -> Result<SparseFamily> {
        let n = system.n();
        let mut generations: BTreeMap<i32, Vec<(DyadicCube, f64)>> = BTreeMap::new();
        let mut current_gen: Option<i32> = None;
        let mut shift: Option<Shift> = None;
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# generation") {
                current_gen = Some(
                    rest.trim()
                        .parse::<i32>()
                        .map_err(|e| Error::Parse(format!("bad generation header: {e}")))?,
                );
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != n + 2 {
                return Err(Error::Parse(format!(
                    "expected `t k j1..j{n}`, got {line:?}"
                )));
            }
            let t = Shift::from_digits(tokens[0])?;
            if *shift.get_or_insert(t) != t {
                return Err(Error::Parse("mixed grids in one family".into()));
            }
            let level: i32 = tokens[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad level: {e}")))?;
            let index: Vec<i64> = tokens[2..]
                .iter()
                .map(|s| s.parse().map_err(|e| Error::Parse(format!("bad index: {e}"))))
                .collect::<Result<_>>()?;
            let cube = DyadicCube::new(level, index, t);
            generations
                .entry(current_gen.unwrap_or(level))
                .or_default()
                .push((cube, f64::NAN));
        }
        SparseFamily::from_generations(system, shift.unwrap_or(Shift::NONE), generations)
    }

    /// Check the four sparseness invariants bit-exactly on the cell masks.
    /// Reports the first violation with the offending cube.
    pub fn verify(&self) -> SparseVerifyReport {
        let keys: Vec<i32> = self.generations.keys().copied().collect();
        // 1: within one generation, cubes are pairwise disjoint
        for (&k, cubes) in &self.generations {
            let mut acc = CellMask::empty(self.tmesh.count());
            for sc in cubes {
                let m = self.cube_mask(&sc.cube);
                if !acc.is_disjoint(&m) {
                    return violation(
                        SparseInvariant::GenerationDisjoint,
                        k,
                        &sc.cube,
                        "overlaps another cube of its generation",
                    );
                }
                acc.or_assign(&m);
            }
        }
        // 2: consecutive generations nest
        for w in keys.windows(2) {
            let (k, kn) = (w[0], w[1]);
            if kn != k + 1 {
                continue;
            }
            let g = self.gamma(k);
            let gn = self.gamma(kn);
            if !gn.is_subset_of(&g) {
                let cube = self.generations[&kn][0].cube.clone();
                return violation(
                    SparseInvariant::GammaNested,
                    kn,
                    &cube,
                    "next generation escapes the current one",
                );
            }
        }
        // 3: the next generation covers at most half of every cube
        for (&k, cubes) in &self.generations {
            let gn = self.gamma(k + 1);
            for sc in cubes {
                let bm = self.cube_mask(&sc.cube);
                let covered = bm.intersection_count(&gn);
                if 2 * covered > bm.count() {
                    return violation(
                        SparseInvariant::HalfDensity,
                        k,
                        &sc.cube,
                        &format!("next generation covers {covered} of {} cells", bm.count()),
                    );
                }
            }
        }
        // 4: essential sets disjoint and at least half the cube
        let mut acc = CellMask::empty(self.tmesh.count());
        for (&k, cubes) in &self.generations {
            for sc in cubes {
                let bm = self.cube_mask(&sc.cube);
                if 2 * sc.e_mask.count() < bm.count() {
                    return violation(
                        SparseInvariant::EssentialSets,
                        k,
                        &sc.cube,
                        &format!("|E| = {} cells of {}", sc.e_mask.count(), bm.count()),
                    );
                }
                if !acc.is_disjoint(&sc.e_mask) {
                    return violation(
                        SparseInvariant::EssentialSets,
                        k,
                        &sc.cube,
                        "essential set overlaps an earlier one",
                    );
                }
                acc.or_assign(&sc.e_mask);
            }
        }
        SparseVerifyReport::default()
    }
}

fn violation(
    invariant: SparseInvariant,
    generation: i32,
    cube: &DyadicCube,
    detail: &str,
) -> SparseVerifyReport {
    SparseVerifyReport {
        violation: Some(SparseViolation {
            invariant,
            generation,
            cube: cube.clone(),
            detail: detail.to_string(),
        }),
    }
}

/// Per-cell maximal field of the stopping quantity on one grid, plus the
/// pyramid machinery to query per-cube quantities and the virtual-ancestor
/// data that keeps parentless top cubes honestly banded.
struct StoppingField {
    system: Arc<RootSystem>,
    pyramids: Vec<Pyramid>,
    /// `|Q|^{alpha/(mn) - 1}` log2-slope per level unit.
    size_exp: f64,
    /// Maximal in-root cubes of the grid (their parents leave the root).
    forest: Vec<DyadicCube>,
    /// Stopping quantity of each top's immediate out-of-root parent,
    /// computed from per-top masses (the data vanishes outside the root).
    top_parent_sigma: std::collections::HashMap<DyadicCube, f64>,
    /// Supremum of the stopping quantity over all out-of-root ancestors.
    virtual_sup: f64,
}

impl StoppingField {
    fn new(f: &[&GridFunction], e: &ExponentData, shift: Shift) -> StoppingField {
        let system = f[0].system().clone();
        let n = system.n();
        let m = e.m();
        let pyramids: Vec<Pyramid> = f.iter().map(|g| Pyramid::build(g, shift)).collect();
        let size_exp =
            rat_to_f64(e.alpha_over_n() / m as i128 - Rat::from_integer(1)) * n as f64;
        let coarsest = pyramids[0].coarsest();
        let mut forest: Vec<DyadicCube> = Vec::new();
        for k in coarsest..=system.max_level() {
            for q in system.level_range(k, shift).iter_cubes() {
                if k == coarsest || !system.contains_cube(&q.parent_cube()) {
                    forest.push(q);
                }
            }
        }

        // per-top masses per slot
        let masses: Vec<Vec<f64>> = forest
            .iter()
            .map(|t| pyramids.iter().map(|p| p.sum(t).unwrap_or(0.0)).collect())
            .collect();

        // out-of-root ancestors: sigma over an ancestor A is computed from
        // the masses of the tops inside A; walk each top's chain until the
        // contained top set stops growing (sigma then decays strictly)
        let norm_at = |level: i32| 2f64.powf(-(level as f64) * size_exp);
        let sigma_of_tops = |a: &DyadicCube| {
            let mut per_slot = vec![0.0f64; m];
            for (t, tm) in forest.iter().zip(&masses) {
                if a.contains_cube(t) {
                    for (acc, &v) in per_slot.iter_mut().zip(tm) {
                        *acc += v;
                    }
                }
            }
            per_slot.iter().map(|&s| norm_at(a.level) * s).product::<f64>()
        };
        let mut virtual_sup = 0.0f64;
        let mut top_parent_sigma = std::collections::HashMap::new();
        let mut visited: std::collections::HashSet<DyadicCube> = Default::default();
        for t in &forest {
            let mut a = t.parent_cube();
            top_parent_sigma.insert(t.clone(), sigma_of_tops(&a));
            let mut prev_count = usize::MAX;
            loop {
                if !visited.insert(a.clone()) {
                    break;
                }
                let count = forest.iter().filter(|t2| a.contains_cube(t2)).count();
                virtual_sup = virtual_sup.max(sigma_of_tops(&a));
                if count == prev_count {
                    break; // stabilized: sigma strictly decreases from here
                }
                prev_count = count;
                a = a.parent_cube();
            }
        }

        StoppingField {
            system,
            pyramids,
            size_exp,
            forest,
            top_parent_sigma,
            virtual_sup,
        }
    }

    fn sigma_by_index(&self, level: i32, index: &[i64]) -> Option<f64> {
        let norm = 2f64.powf(-(level as f64) * self.size_exp);
        let mut val = 1.0;
        for py in &self.pyramids {
            val *= norm * py.sum_by_index(level, index)?;
        }
        Some(val)
    }

    fn sigma(&self, q: &DyadicCube) -> Option<f64> {
        self.sigma_by_index(q.level, &q.index)
    }

    /// Stopping quantity of the parent, virtual for forest tops. With
    /// `banded = false` tops report a zero parent (plain maximal selection).
    fn parent_sigma(&self, q: &DyadicCube, banded: bool) -> f64 {
        let p = q.parent_cube();
        if self.system.contains_cube(&p) {
            self.sigma(&p).unwrap_or(0.0)
        } else if banded {
            *self.top_parent_sigma.get(q).unwrap_or(&0.0)
        } else {
            0.0
        }
    }

    /// Per-cell maximum of sigma along the ancestor chain: `(max, min positive)`.
    fn field_extrema(&self) -> (f64, f64) {
        let tmesh = self.system.level_range(self.system.max_level(), self.pyramids[0].shift());
        let mut m_max = 0.0f64;
        let mut m_min_pos = f64::INFINITY;
        for flat in 0..tmesh.count() {
            let mut q = tmesh.cube(flat);
            let mut best = 0.0f64;
            loop {
                match self.sigma(&q) {
                    Some(s) => best = best.max(s),
                    None => break,
                }
                let p = q.parent_cube();
                if !self.system.contains_cube(&p) {
                    break;
                }
                q = p;
            }
            if best > 0.0 {
                m_max = m_max.max(best);
                m_min_pos = m_min_pos.min(best);
            }
        }
        (m_max, m_min_pos)
    }

    /// Banded stopping selection at threshold `a^k`: the maximal in-root
    /// cubes with `sigma > a^k` whose (possibly virtual) parent quantity is
    /// at most `a^k`. The bounded jump `sigma(Q) <= 2^{mn-alpha}
    /// sigma(parent)` then pins every selected cube into the band
    /// `(a^k, 2^{mn-alpha} a^k]` and no cube is selected at two thresholds.
    fn select(&self, threshold: f64, banded: bool) -> Vec<(DyadicCube, f64)> {
        let mut picked = Vec::new();
        let mut stack: Vec<DyadicCube> = self.forest.iter().rev().cloned().collect();
        while let Some(q) = stack.pop() {
            let Some(sigma) = self.sigma(&q) else { continue };
            if sigma > threshold && self.parent_sigma(&q, banded) <= threshold {
                picked.push((q, sigma));
            } else if sigma > 0.0 && q.level < self.system.max_level() {
                stack.extend(q.children().into_iter().rev());
            }
        }
        picked
    }
}

/// Outcome of the builder: the family plus the window diagnostics.
pub struct BuildOutcome {
    pub family: SparseFamily,
    pub stopping_ratio: f64,
    pub window: Option<(i32, i32)>,
}

/// Stopping-time construction of a sparse family on one grid.
///
/// `f` must be supported in the root (grids always are); an identically zero
/// input yields an empty family. Selection is banded by the (virtual)
/// parent quantity, so every selected cube satisfies
/// `a^k < sigma(Q) <= 2^{mn - alpha} a^k` and the four sparseness invariants
/// hold for arbitrary nonnegative data. The window bottom is the last
/// threshold below the maximal field's minimum positive value, raised when
/// necessary so that no out-of-root ancestor still exceeds the threshold
/// (near-constant data can leave the window empty: the untruncated
/// construction for such data lives on cubes larger than any root).
pub fn build_sparse(
    f: &[&GridFunction],
    e: &ExponentData,
    shift: Shift,
) -> Result<BuildOutcome> {
    let (field, a) = stopping_setup(f, e, shift)?;
    let system = f[0].system().clone();
    let (m_max, m_min_pos) = field.field_extrema();
    if m_max <= 0.0 {
        let family = SparseFamily::from_generations(system, shift, BTreeMap::new())?;
        return Ok(BuildOutcome { family, stopping_ratio: a, window: None });
    }

    let k_hi = last_power_below(a, m_max);
    let coverage_lo = last_power_below(a, m_min_pos);
    let virtual_lo = if field.virtual_sup > 0.0 {
        last_power_below(a, field.virtual_sup) + 1
    } else {
        i32::MIN + 1
    };
    let k_lo = coverage_lo.max(virtual_lo);

    let mut generations: BTreeMap<i32, Vec<(DyadicCube, f64)>> = BTreeMap::new();
    for k in k_lo..=k_hi {
        let picked = field.select(a.powi(k), true);
        if !picked.is_empty() {
            generations.insert(k, picked);
        }
    }

    let mut family = SparseFamily::from_generations(system, shift, generations)?;
    family.stopping_ratio = Some(a);
    let window = (k_lo <= k_hi).then_some((k_lo, k_hi));
    Ok(BuildOutcome { family, stopping_ratio: a, window })
}

fn stopping_setup(
    f: &[&GridFunction],
    e: &ExponentData,
    shift: Shift,
) -> Result<(StoppingField, f64)> {
    if f.len() != e.m() {
        return Err(Error::InvalidExponents(format!(
            "{} inputs for m = {}",
            f.len(),
            e.m()
        )));
    }
    for g in f {
        if !f[0].same_mesh(g) {
            return Err(Error::MeshMismatch);
        }
    }
    Ok((StoppingField::new(f, e, shift), e.stopping_ratio()))
}

/// Largest `k` with `a^k < x`.
fn last_power_below(a: f64, x: f64) -> i32 {
    let mut k = (x.ln() / a.ln()).floor() as i32;
    while a.powi(k) >= x {
        k -= 1;
    }
    while a.powi(k + 1) < x {
        k += 1;
    }
    k
}

/// Level-set domination report: `lhs = \int (M f)^q u` against the sparse
/// sum `rhs = a^q sum_{k,j} sigma(Q_j^k)^q u(E(Q_j^k))`.
#[derive(Clone, Debug)]
pub struct DominationReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, with the `0/0` convention reported as 0.
    pub ratio: f64,
}

/// Check the level-set domination of the grid maximal field by the stopping
/// decomposition of the same data (standard grid): the generations run over
/// the full coverage window (down to the last threshold below the minimum
/// positive field value), which together with the per-cube lower selection
/// bounds makes `ratio <= 1` unconditional.
pub fn sparse_domination_check(
    f: &[&GridFunction],
    e: &ExponentData,
    u: &GridFunction,
) -> Result<DominationReport> {
    let shift = Shift::NONE;
    if !u.same_mesh(f[0]) {
        return Err(Error::MeshMismatch);
    }
    let (field, a) = stopping_setup(f, e, shift)?;
    let system = f[0].system().clone();
    let ell = system.max_level();
    let tmesh = system.level_range(ell, shift);
    let q = e.q_f64();

    // u-integral of every finest cell, then the maximal field per cell
    let n = system.n();
    let u_cell: Vec<f64> = (0..tmesh.count())
        .map(|flat| {
            let c = tmesh.cube(flat);
            let lo: Vec<Rat> = (0..n).map(|i| c.lower(i)).collect();
            let hi: Vec<Rat> = (0..n).map(|i| c.upper(i)).collect();
            u.integral_box(&lo, &hi)
        })
        .collect();

    let lhs_terms: Vec<f64> = (0..tmesh.count())
        .map(|flat| {
            let mut cube = tmesh.cube(flat);
            let mut best = 0.0f64;
            loop {
                if let Some(s) = field.sigma(&cube) {
                    best = best.max(s);
                } else {
                    break;
                }
                let p = cube.parent_cube();
                if !system.contains_cube(&p) {
                    break;
                }
                cube = p;
            }
            best.powf(q) * u_cell[flat]
        })
        .collect();
    let lhs = crate::grid::pairwise_sum(&lhs_terms);

    let (m_max, m_min_pos) = field.field_extrema();
    if m_max <= 0.0 {
        return Ok(DominationReport { lhs: 0.0, rhs: 0.0, ratio: 0.0 });
    }
    let mut generations: BTreeMap<i32, Vec<(DyadicCube, f64)>> = BTreeMap::new();
    for k in last_power_below(a, m_min_pos)..=last_power_below(a, m_max) {
        // plain maximal selection: only the lower bound matters here and
        // the window must reach the full support of the field
        let picked = field.select(a.powi(k), false);
        if !picked.is_empty() {
            generations.insert(k, picked);
        }
    }
    let family = SparseFamily::from_generations(system, shift, generations)?;

    let rhs_terms: Vec<f64> = family
        .generations()
        .values()
        .flat_map(|cubes| {
            cubes.iter().map(|sc| {
                let ue: f64 = sc.e_mask.iter_ones().map(|b| u_cell[b]).sum();
                sc.sigma.powf(q) * ue
            })
        })
        .collect();
    let rhs = a.powf(q) * crate::grid::pairwise_sum(&rhs_terms);

    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(DominationReport { lhs, rhs, ratio })
}

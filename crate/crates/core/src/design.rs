//! Experimental design: balanced generation, correlation-reducing swaps and blocking.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, LevelValue, Product};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignOptions {
    pub tasks: usize,
    pub alternatives: usize,
    pub blocks: usize,
    pub seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { tasks: 200, alternatives: 4, blocks: 50, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceTask {
    pub id: u32,
    pub block: u32,
    pub alternatives: Vec<Product>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub tasks: Vec<ChoiceTask>,
    pub blocks: usize,
    pub seed: u64,
}

impl Design {
    pub fn rows(&self) -> impl Iterator<Item = &Product> {
        self.tasks.iter().flat_map(|t| t.alternatives.iter())
    }

    pub fn n_rows(&self) -> usize {
        self.tasks.iter().map(|t| t.alternatives.len()).sum()
    }
}

/// Level counts and correlation summary of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDiagnostics {
    /// Level counts per balance domain (`attribute`, or `attribute@cut` for per-cut levels).
    pub level_counts: BTreeMap<String, BTreeMap<String, usize>>,
    /// Largest max−min level count over domains.
    pub max_spread: usize,
    /// Total excess spread beyond what the domain sizes force.
    pub imbalance: usize,
    /// Largest absolute correlation between coded columns of different attributes.
    pub max_abs_correlation: f64,
    pub worst_pair: Option<(String, String)>,
    /// Columns with zero variance, for which correlations are undefined.
    pub degenerate: Vec<String>,
    pub block_sizes: BTreeMap<u32, usize>,
}

/// Cuts are treated as attribute slot 0; schema attributes follow.
struct Layout {
    /// Per slot: level labels.
    labels: Vec<Vec<String>>,
    /// Per slot: balance domain key of each row.
    names: Vec<String>,
    /// Coded columns: (slot, label).
    columns: Vec<(usize, String)>,
}

struct Grid {
    cuts: Vec<String>,
    /// rows × slots, level index of each row (None where not applicable).
    cells: Vec<Vec<Option<usize>>>,
}

fn slot_levels(schema: &AttributeSchema, slot: usize, cut: &str) -> Option<Vec<String>> {
    if slot == 0 {
        return Some(schema.cuts.clone());
    }
    let a = &schema.attributes[slot - 1];
    if !a.applies_to(cut) {
        return None;
    }
    if a.is_categorical() {
        Some(a.levels.clone())
    } else {
        a.design_values(cut).map(|v| v.iter().map(|x| format!("{x}")).collect())
    }
}

fn per_cut_domain(schema: &AttributeSchema, slot: usize) -> bool {
    slot > 0 && !schema.attributes[slot - 1].per_cut.is_empty()
}

fn domain_key(schema: &AttributeSchema, slot: usize, cut: &str) -> String {
    if slot == 0 {
        "cut".into()
    } else if per_cut_domain(schema, slot) {
        format!("{}@{}", schema.attributes[slot - 1].name, cut)
    } else {
        schema.attributes[slot - 1].name.clone()
    }
}

fn layout(schema: &AttributeSchema) -> Layout {
    let slots = schema.attributes.len() + 1;
    let mut labels = Vec::new();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for s in 0..slots {
        names.push(if s == 0 { "cut".to_string() } else { schema.attributes[s - 1].name.clone() });
        let l: Vec<String> = if s == 0 {
            schema.cuts.clone()
        } else if schema.attributes[s - 1].is_categorical() {
            schema.attributes[s - 1].levels.clone()
        } else {
            Vec::new()
        };
        if s == 0 || schema.attributes[s - 1].is_categorical() {
            // effects columns: all but the last label for cuts, all but the base otherwise
            let base = if s == 0 { l.last().cloned() } else { schema.attributes[s - 1].base.clone() };
            for lab in l.iter().filter(|x| Some(*x) != base.as_ref()) {
                columns.push((s, lab.clone()));
            }
        } else {
            columns.push((s, String::new()));
        }
        labels.push(l);
    }
    Layout { labels, names, columns }
}

impl Grid {
    /// Coded value of column `(slot, label)` in row `r`.
    fn value(&self, schema: &AttributeSchema, lay: &Layout, col: usize, r: usize) -> f64 {
        let (slot, ref label) = lay.columns[col];
        let Some(idx) = self.cells[r][slot] else { return 0.0 };
        if slot == 0 || schema.attributes[slot - 1].is_categorical() {
            let labels = &lay.labels[slot];
            let base = if slot == 0 { labels.len() - 1 } else {
                let b = schema.attributes[slot - 1].base.as_deref().unwrap_or("");
                labels.iter().position(|x| x == b).unwrap_or(0)
            };
            if idx == base {
                -1.0
            } else if labels[idx] == *label {
                1.0
            } else {
                0.0
            }
        } else {
            let vals = schema.attributes[slot - 1].design_values(&self.cuts[r]).unwrap_or(&[]);
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = libm::sqrt(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n);
            if sd > 0.0 { (vals[idx] - mean) / sd } else { 0.0 }
        }
    }

    fn from_design(schema: &AttributeSchema, design: &Design) -> Result<Grid> {
        let slots = schema.attributes.len() + 1;
        let mut cuts = Vec::new();
        let mut cells = Vec::new();
        for p in design.rows() {
            schema.check_cut(&p.cut)?;
            let mut row = vec![None; slots];
            row[0] = schema.cuts.iter().position(|c| *c == p.cut);
            for s in 1..slots {
                let a = &schema.attributes[s - 1];
                let Some(levels) = slot_levels(schema, s, &p.cut) else { continue };
                let v = p
                    .levels
                    .get(&a.name)
                    .ok_or_else(|| Error::MissingAttribute { attribute: a.name.clone(), cut: p.cut.clone() })?;
                let idx = match v {
                    LevelValue::Level(l) => levels.iter().position(|x| x == l),
                    LevelValue::Value(x) => a
                        .design_values(&p.cut)
                        .and_then(|vals| vals.iter().position(|y| y.to_bits() == x.to_bits())),
                };
                row[s] = Some(idx.ok_or_else(|| Error::UnknownLevel { attribute: a.name.clone(), level: v.to_string() })?);
            }
            cuts.push(p.cut.clone());
            cells.push(row);
        }
        Ok(Grid { cuts, cells })
    }

    fn product(&self, schema: &AttributeSchema, r: usize) -> Product {
        let mut levels = BTreeMap::new();
        for (s, a) in schema.attributes.iter().enumerate() {
            if let Some(idx) = self.cells[r][s + 1] {
                let v = if a.is_categorical() {
                    LevelValue::Level(a.levels[idx].clone())
                } else {
                    LevelValue::Value(a.design_values(&self.cuts[r]).expect("applicable")[idx])
                };
                levels.insert(a.name.clone(), v);
            }
        }
        Product { cut: self.cuts[r].clone(), levels }
    }
}

fn balanced(levels: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut seq: Vec<usize> = (0..m / levels).flat_map(|_| 0..levels).collect();
    let mut extra: Vec<usize> = (0..levels).collect();
    extra.shuffle(rng);
    seq.extend(extra.into_iter().take(m % levels));
    seq.shuffle(rng);
    seq
}

fn check_options(opts: &DesignOptions) -> Result<()> {
    if opts.tasks == 0 || opts.alternatives == 0 || opts.blocks == 0 {
        return Err(Error::Design("tasks, alternatives and blocks must be positive".into()));
    }
    if opts.tasks % opts.blocks != 0 {
        return Err(Error::Design(format!("{} tasks do not split evenly into {} blocks", opts.tasks, opts.blocks)));
    }
    Ok(())
}

/// Random design with every level balanced within its domain: cuts over all
/// rows, attributes over the rows they apply to, per-cut levels within each cut.
pub fn generate(schema: &AttributeSchema, opts: &DesignOptions) -> Result<Design> {
    schema.validate()?;
    check_options(opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.tasks * opts.alternatives;
    let slots = schema.attributes.len() + 1;
    let cut_seq = balanced(schema.cuts.len(), n, &mut rng);
    let cuts: Vec<String> = cut_seq.iter().map(|i| schema.cuts[*i].clone()).collect();
    let mut cells = vec![vec![None; slots]; n];
    for r in 0..n {
        cells[r][0] = Some(cut_seq[r]);
    }
    for s in 1..slots {
        let mut domains: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (r, cut) in cuts.iter().enumerate() {
            if slot_levels(schema, s, cut).is_some() {
                domains.entry(domain_key(schema, s, cut)).or_default().push(r);
            }
        }
        for rows in domains.values() {
            let levels = slot_levels(schema, s, &cuts[rows[0]]).expect("applicable").len();
            for (r, l) in rows.iter().zip(balanced(levels, rows.len(), &mut rng)) {
                cells[*r][s] = Some(l);
            }
        }
    }
    let grid = Grid { cuts, cells };
    let design = to_design(schema, &grid, opts.alternatives, opts.blocks, opts.seed);
    Ok(assign_blocks(schema, &design, opts.blocks)?)
}

fn to_design(schema: &AttributeSchema, grid: &Grid, alternatives: usize, blocks: usize, seed: u64) -> Design {
    let n = grid.cells.len();
    let tasks = (0..n / alternatives)
        .map(|t| ChoiceTask {
            id: t as u32,
            block: 0,
            alternatives: (0..alternatives).map(|a| grid.product(schema, t * alternatives + a)).collect(),
        })
        .collect();
    Design { tasks, blocks, seed }
}

/// Cross-product state for incremental correlation updates.
struct Moments {
    n: f64,
    sums: Vec<f64>,
    cross: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
}

impl Moments {
    fn new(x: &[Vec<f64>], attr: &[usize]) -> Moments {
        let k = attr.len();
        let mut sums = vec![0.0; k];
        let mut cross = vec![vec![0.0; k]; k];
        for row in x {
            for c in 0..k {
                sums[c] += row[c];
                for d in 0..k {
                    cross[c][d] += row[c] * row[d];
                }
            }
        }
        let mut pairs = Vec::new();
        for c in 0..k {
            for d in c + 1..k {
                if attr[c] != attr[d] {
                    pairs.push((c, d));
                }
            }
        }
        Moments { n: x.len() as f64, sums, cross, pairs }
    }

    fn var(&self, c: usize) -> f64 {
        self.cross[c][c] - self.sums[c] * self.sums[c] / self.n
    }

    fn corr(&self, c: usize, d: usize) -> Option<f64> {
        let (vc, vd) = (self.var(c), self.var(d));
        if vc <= 1e-12 || vd <= 1e-12 {
            return None;
        }
        Some((self.cross[c][d] - self.sums[c] * self.sums[d] / self.n) / libm::sqrt(vc * vd))
    }

    /// `(max |r|, Σ r², worst pair)` over pairs of different attributes.
    fn objective(&self) -> (f64, f64, Option<(usize, usize)>) {
        let mut max = 0.0;
        let mut sum = 0.0;
        let mut worst = None;
        for &(c, d) in &self.pairs {
            if let Some(r) = self.corr(c, d) {
                sum += r * r;
                if libm::fabs(r) > max {
                    max = libm::fabs(r);
                    worst = Some((c, d));
                }
            }
        }
        (max, sum, worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImproveOptions {
    pub max_iters: usize,
    /// Weight of the correlation term relative to level imbalance.
    pub correlation_weight: f64,
}

impl Default for ImproveOptions {
    fn default() -> Self {
        ImproveOptions { max_iters: 50_000, correlation_weight: 1.0 }
    }
}

/// Swaps levels between rows of the same balance domain while the objective
/// `imbalance + w · max|r|` (ties broken by `Σ r²`) decreases. Swaps keep every
/// level count, so balance is preserved. Returns when no improving swap is found
/// or after `max_iters` proposals; blocks are then reassigned.
pub fn improve(schema: &AttributeSchema, design: &Design, opts: &ImproveOptions) -> Result<Design> {
    let alternatives = design.tasks.first().map(|t| t.alternatives.len()).unwrap_or(1);
    if design.tasks.iter().any(|t| t.alternatives.len() != alternatives) {
        return Err(Error::Design("tasks have unequal numbers of alternatives".into()));
    }
    let mut grid = Grid::from_design(schema, design)?;
    let lay = layout(schema);
    let n = grid.cells.len();
    let k = lay.columns.len();
    let attr: Vec<usize> = lay.columns.iter().map(|c| c.0).collect();
    let mut x: Vec<Vec<f64>> = (0..n).map(|r| (0..k).map(|c| grid.value(schema, &lay, c, r)).collect()).collect();
    let mut m = Moments::new(&x, &attr);
    let (mut best_max, mut best_sum, mut worst) = m.objective();
    let w = opts.correlation_weight;

    // swap candidates per slot: domain -> rows
    let slots = lay.names.len();
    let mut domains: Vec<Vec<Vec<usize>>> = vec![Vec::new(); slots];
    for s in 1..slots {
        let mut by: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for r in 0..n {
            if grid.cells[r][s].is_some() {
                by.entry(domain_key(schema, s, &grid.cuts[r])).or_default().push(r);
            }
        }
        domains[s] = by.into_values().filter(|v| v.len() > 1).collect();
    }
    let swappable: Vec<usize> = (1..slots).filter(|s| !domains[*s].is_empty()).collect();
    if swappable.is_empty() || best_max == 0.0 {
        return assign_blocks(schema, design, design.blocks);
    }
    let cols_of: Vec<Vec<usize>> = (0..slots).map(|s| (0..k).filter(|c| attr[*c] == s).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(design.seed ^ 0x5eed_da7a);
    let try_swap = |grid: &mut Grid, x: &mut Vec<Vec<f64>>, m: &mut Moments, s: usize, i: usize, j: usize, best: (f64, f64)| {
        if grid.cells[i][s] == grid.cells[j][s] {
            return None;
        }
        let saved: Vec<Vec<f64>> = cols_of[s].iter().map(|c| m.cross[*c].clone()).collect();
        for &c in &cols_of[s] {
            let dc = x[j][c] - x[i][c];
            for d in 0..k {
                if attr[d] != s {
                    let delta = dc * (x[i][d] - x[j][d]);
                    m.cross[c][d] += delta;
                    m.cross[d][c] += delta;
                }
            }
        }
        let (mx, sm, wst) = m.objective();
        let better = w * mx < w * best.0 - 1e-15 || (mx <= best.0 && sm < best.1 - 1e-15);
        if better {
            let (a, b) = (grid.cells[i][s], grid.cells[j][s]);
            grid.cells[i][s] = b;
            grid.cells[j][s] = a;
            for &c in &cols_of[s] {
                let t = x[i][c];
                x[i][c] = x[j][c];
                x[j][c] = t;
            }
            Some((mx, sm, wst))
        } else {
            for (idx, &c) in cols_of[s].iter().enumerate() {
                m.cross[c] = saved[idx].clone();
                for d in 0..k {
                    m.cross[d][c] = m.cross[c][d];
                }
            }
            None
        }
    };

    let total_pairs: usize = swappable.iter().map(|s| domains[*s].iter().map(|d| d.len() * d.len()).sum::<usize>()).sum();
    let exhaustive = total_pairs <= 200_000;
    let patience = 4_000;
    let mut idle = 0;
    let mut iter = 0;
    while iter < opts.max_iters {
        iter += 1;
        let s = match worst {
            Some((c, d)) if rng.random_bool(0.5) => {
                let pick = if rng.random_bool(0.5) { attr[c] } else { attr[d] };
                if domains[pick].is_empty() { swappable[rng.random_range(0..swappable.len())] } else { pick }
            }
            _ => swappable[rng.random_range(0..swappable.len())],
        };
        let dom = &domains[s][rng.random_range(0..domains[s].len())];
        let i = dom[rng.random_range(0..dom.len())];
        let j = dom[rng.random_range(0..dom.len())];
        match try_swap(&mut grid, &mut x, &mut m, s, i, j, (best_max, best_sum)) {
            Some((mx, sm, wst)) => {
                best_max = mx;
                best_sum = sm;
                worst = wst;
                idle = 0;
            }
            None => idle += 1,
        }
        if best_max == 0.0 && best_sum == 0.0 {
            break;
        }
        if idle >= patience {
            if !exhaustive {
                break;
            }
            let mut found = false;
            'scan: for &s in &swappable {
                for dom in &domains[s] {
                    for a in 0..dom.len() {
                        for b in a + 1..dom.len() {
                            if let Some((mx, sm, wst)) =
                                try_swap(&mut grid, &mut x, &mut m, s, dom[a], dom[b], (best_max, best_sum))
                            {
                                best_max = mx;
                                best_sum = sm;
                                worst = wst;
                                found = true;
                                break 'scan;
                            }
                        }
                    }
                }
            }
            if !found {
                break;
            }
            idle = 0;
        }
    }
    let out = to_design(schema, &grid, alternatives, design.blocks, design.seed);
    assign_blocks(schema, &out, design.blocks)
}

/// Orders tasks by their summed coded values and deals them round-robin into blocks.
pub fn assign_blocks(schema: &AttributeSchema, design: &Design, blocks: usize) -> Result<Design> {
    if blocks == 0 || design.tasks.len() % blocks != 0 {
        return Err(Error::Design(format!("{} tasks do not split evenly into {blocks} blocks", design.tasks.len())));
    }
    let grid = Grid::from_design(schema, design)?;
    let lay = layout(schema);
    let mut r = 0;
    let mut scores = Vec::new();
    for t in &design.tasks {
        let mut s = 0.0;
        for _ in &t.alternatives {
            s += (0..lay.columns.len()).map(|c| grid.value(schema, &lay, c, r)).sum::<f64>();
            r += 1;
        }
        scores.push((s, t.id));
    }
    scores.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let block_of: BTreeMap<u32, u32> = scores.iter().enumerate().map(|(rank, (_, id))| (*id, (rank % blocks) as u32)).collect();
    let mut out = design.clone();
    out.blocks = blocks;
    for t in &mut out.tasks {
        t.block = block_of[&t.id];
    }
    Ok(out)
}

pub fn diagnostics(schema: &AttributeSchema, design: &Design) -> Result<DesignDiagnostics> {
    let grid = Grid::from_design(schema, design)?;
    let lay = layout(schema);
    let n = grid.cells.len();
    let slots = lay.names.len();
    let mut level_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut domain_sizes: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in 0..n {
        for s in 0..slots {
            if let (Some(idx), Some(levels)) = (grid.cells[r][s], slot_levels(schema, s, &grid.cuts[r])) {
                let key = domain_key(schema, s, &grid.cuts[r]);
                let e = level_counts.entry(key.clone()).or_insert_with(|| levels.iter().map(|l| (l.clone(), 0)).collect());
                *e.get_mut(&levels[idx]).expect("level") += 1;
                let d = domain_sizes.entry(key).or_insert((0, levels.len()));
                d.0 += 1;
            }
        }
    }
    let mut max_spread = 0;
    let mut imbalance = 0;
    for (key, counts) in &level_counts {
        let hi = counts.values().max().copied().unwrap_or(0);
        let lo = counts.values().min().copied().unwrap_or(0);
        let spread = hi - lo;
        let (m, l) = domain_sizes[key];
        let forced = usize::from(m % l != 0);
        max_spread = max_spread.max(spread);
        imbalance += spread.saturating_sub(forced);
    }
    let k = lay.columns.len();
    let attr: Vec<usize> = lay.columns.iter().map(|c| c.0).collect();
    let x: Vec<Vec<f64>> = (0..n).map(|r| (0..k).map(|c| grid.value(schema, &lay, c, r)).collect()).collect();
    let m = Moments::new(&x, &attr);
    let (max_abs_correlation, _, worst) = m.objective();
    let col_name = |c: usize| {
        let (s, ref l) = lay.columns[c];
        if l.is_empty() { lay.names[s].clone() } else { format!("{}.{}", lay.names[s], l) }
    };
    let degenerate = (0..k).filter(|c| m.var(*c) <= 1e-12).map(col_name).collect();
    let mut block_sizes = BTreeMap::new();
    for t in &design.tasks {
        *block_sizes.entry(t.block).or_insert(0) += 1;
    }
    Ok(DesignDiagnostics {
        level_counts,
        max_spread,
        imbalance,
        max_abs_correlation,
        worst_pair: worst.map(|(c, d)| (col_name(c), col_name(d))),
        degenerate,
        block_sizes,
    })
}

//! Exact depth-first branch-and-bound for [`BinaryProgram`].
//!
//! Branching happens on whole one-hot groups: fixing the row group and the
//! column group of one CAV at one step is the same as choosing a cell, and it
//! propagates the one-row/one-column equalities for free. Slots are visited in
//! `(step, cav)` order.
//!
//! Every constraint row is classified by the slots it touches:
//!
//! * rows on a single slot become a per-slot cell mask,
//! * rows on two consecutive steps of one CAV become a transition table,
//! * everything else is checked once its last slot in search order is fixed.
//!
//! The lower bound is the fixed part of the objective plus, for every CAV, the
//! cheapest completion of its own path under its masks and transition tables
//! (cross-CAV rows relaxed). Because no row spans more than two consecutive
//! steps, the remaining problem after a full step depends only on the cells
//! of that step; a memo of the best cost per `(step, cells)` prunes repeated
//! configurations.
//!
//! Among optimal plans the one with the lexicographically smallest variable
//! vector wins. Rows come before columns in each one-hot group, so that is the
//! plan choosing the highest row, then the highest column, at the earliest
//! slot. A second depth-first pass visits cells in that order, prunes only
//! subtrees that cannot reach the optimal cost, and stops at the first plan
//! that does.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use log::debug;

use super::error::PlannerError;
use super::plan::OccupancyPlan;
use super::program::{BinaryProgram, Family, Sense, VarId, VarMeta};
use crate::grid::CellIndex;
use crate::scalar::Weight;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveLimits {
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
    /// Upper bound on memo entries; beyond it configurations are no longer recorded.
    pub max_memo: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            max_nodes: 50_000_000,
            time_limit: None,
            max_memo: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub memo_hits: u64,
    pub bound_prunes: u64,
    pub incumbents: u32,
}

type Cell = u16;
/// A constraint row over two slots: terms, sense, right-hand side, origin.
type PairRow = (Vec<Term>, Sense, i64, Family);

/// Value of an occupancy variable given the cell of its slot.
#[derive(Debug, Clone, Copy)]
enum Pred {
    Row(usize),
    Col(usize),
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Occ { slot: usize, pred: Pred, coef: i64 },
    Diff { a: (usize, Pred), b: (usize, Pred), coef: i64 },
}

struct Model<W> {
    n_cav: usize,
    n_steps: usize,
    n_cols: usize,
    n_cells: usize,
    /// Allowed cells per slot.
    unary: Vec<Vec<bool>>,
    unary_cost: Vec<Vec<W>>,
    /// Per `(cav, k)` for `k in 1..n_steps`: allowed successor cells with their move cost.
    trans: Vec<Vec<Vec<(Cell, W)>>>,
    /// Rows checked during search, and per (slot, cell) which of them can bite.
    general: Vec<Vec<Term>>,
    general_rows: Vec<(Sense, i64, Family)>,
    checks: Vec<Vec<Vec<usize>>>,
    /// Cheapest completion per `(cav, k, cell)`; `None` if no completion exists.
    h: Vec<Vec<Vec<Option<W>>>>,
    memo_ok: bool,
}

impl Pred {
    fn holds(self, n_cols: usize, cell: Cell) -> bool {
        let cell = cell as usize;
        match self {
            Pred::Row(p) => cell / n_cols + 1 == p,
            Pred::Col(q) => cell % n_cols + 1 == q,
        }
    }
}

fn slot_of(n_steps: usize, cav: usize, k: usize) -> usize {
    cav * n_steps + (k - 1)
}

fn row_lhs(terms: &[Term], n_cols: usize, cell_of: impl Fn(usize) -> Option<Cell>) -> i64 {
    terms
        .iter()
        .map(|t| match *t {
            Term::Occ { slot, pred, coef } => {
                coef * i64::from(cell_of(slot).is_some_and(|c| pred.holds(n_cols, c)))
            }
            Term::Diff { a, b, coef } => {
                let va = cell_of(a.0).is_some_and(|c| a.1.holds(n_cols, c));
                let vb = cell_of(b.0).is_some_and(|c| b.1.holds(n_cols, c));
                coef * i64::from(va != vb)
            }
        })
        .sum()
}

fn sense_ok(sense: Sense, lhs: i64, rhs: i64) -> bool {
    match sense {
        Sense::Le => lhs <= rhs,
        Sense::Eq => lhs == rhs,
        Sense::Ge => lhs >= rhs,
    }
}

fn term_slots(t: &Term) -> [Option<usize>; 2] {
    match *t {
        Term::Occ { slot, .. } => [Some(slot), None],
        Term::Diff { a, b, .. } => [Some(a.0), Some(b.0)],
    }
}

struct Rejections(Vec<(Family, u64)>);

impl Rejections {
    fn note(&mut self, f: Family) {
        match self.0.iter_mut().find(|(g, _)| *g == f) {
            Some(e) => e.1 += 1,
            None => self.0.push((f, 1)),
        }
    }

    fn worst(&self) -> Option<Family> {
        self.0
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|e| e.0)
    }
}

impl<W: Weight> Model<W> {
    fn build(program: &BinaryProgram<W>) -> Result<Self, (PlannerError, Option<Family>)> {
        let l = program.layout;
        let (n_cav, n_steps, n_rows, n_cols) = (l.n_cav, l.n_steps, l.n_rows, l.n_cols);
        let n_cells = n_rows * n_cols;
        if n_cells > Cell::MAX as usize {
            return Err((PlannerError::Unsupported("grid too large".into()), None));
        }
        let n_slots = n_cav * n_steps;
        let occ = |v: VarId| -> Option<(usize, Pred)> {
            match program.vars[v] {
                VarMeta::Row { cav, k, p } => Some((slot_of(n_steps, cav, k), Pred::Row(p))),
                VarMeta::Col { cav, k, q } => Some((slot_of(n_steps, cav, k), Pred::Col(q))),
                VarMeta::AbsDiff { .. } => None,
            }
        };
        let to_term = |v: VarId, coef: i64| -> Result<Term, PlannerError> {
            match program.vars[v] {
                VarMeta::AbsDiff { a, b } => {
                    let (a, b) = occ(a).zip(occ(b)).ok_or_else(|| {
                        PlannerError::Unsupported("difference of a non-occupancy variable".into())
                    })?;
                    Ok(Term::Diff { a, b, coef })
                }
                _ => {
                    let (slot, pred) = occ(v).expect("occupancy variable");
                    Ok(Term::Occ { slot, pred, coef })
                }
            }
        };
        let step_of = |slot: usize| slot % n_steps + 1;
        let cav_of = |slot: usize| slot / n_steps;

        let mut unary = vec![vec![true; n_cells]; n_slots];
        let mut unary_cost = vec![vec![W::zero(); n_cells]; n_slots];
        let mut pair_rows: HashMap<(usize, usize), Vec<PairRow>> = HashMap::new();
        let mut pair_costs: HashMap<(usize, usize), Vec<(Term, W)>> = HashMap::new();
        let mut general = Vec::new();
        let mut general_rows = Vec::new();
        let mut memo_ok = true;
        let mut rejected = Rejections(Vec::new());

        // Objective.
        for (v, &w) in program.objective.iter().enumerate() {
            if w == W::zero() {
                continue;
            }
            match to_term(v, 1).map_err(|e| (e, None))? {
                Term::Occ { slot, pred, .. } => {
                    for (c, cost) in unary_cost[slot].iter_mut().enumerate() {
                        if pred.holds(n_cols, c as Cell) {
                            *cost = *cost + w;
                        }
                    }
                }
                t @ Term::Diff { a, b, .. } => {
                    if w < W::zero() {
                        return Err((
                            PlannerError::Unsupported("negative weight on a difference".into()),
                            None,
                        ));
                    }
                    let key = (a.0.min(b.0), a.0.max(b.0));
                    if a.0 == b.0 {
                        return Err((PlannerError::Unsupported("difference within one slot".into()), None));
                    }
                    pair_costs.entry(key).or_default().push((t, w));
                }
            }
        }

        // Constraints.
        for row in &program.rows {
            let terms = row
                .terms
                .iter()
                .map(|&(v, a)| to_term(v, a))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| (e, None))?;
            let mut slots: Vec<usize> = terms.iter().flat_map(term_slots).flatten().collect();
            slots.sort_unstable();
            slots.dedup();
            let steps = slots.iter().map(|&s| step_of(s));
            if let (Some(lo), Some(hi)) = (steps.clone().min(), steps.max()) {
                if hi - lo > 1 {
                    memo_ok = false;
                }
            }
            match slots.as_slice() {
                [] => {
                    if !sense_ok(row.sense, 0, row.rhs) {
                        return Err((PlannerError::Infeasible { family: row.family }, Some(row.family)));
                    }
                }
                [s] => {
                    for (c, ok) in unary[*s].iter_mut().enumerate() {
                        if *ok && !sense_ok(row.sense, row_lhs(&terms, n_cols, |_| Some(c as Cell)), row.rhs) {
                            *ok = false;
                            rejected.note(row.family);
                        }
                    }
                }
                [a, b] if cav_of(*a) == cav_of(*b) && *b == *a + 1 => {
                    pair_rows
                        .entry((*a, *b))
                        .or_default()
                        .push((terms, row.sense, row.rhs, row.family));
                }
                _ => {
                    general.push(terms);
                    general_rows.push((row.sense, row.rhs, row.family));
                }
            }
        }
        if pair_costs.keys().any(|&(a, b)| cav_of(a) != cav_of(b) || b != a + 1) {
            return Err((
                PlannerError::Unsupported("difference across non-consecutive slots".into()),
                None,
            ));
        }
        for (s, mask) in unary.iter().enumerate() {
            if !mask.iter().any(|&m| m) {
                let fam = rejected.worst().unwrap_or(Family::OneRow);
                debug!("slot {s} has no admissible cell");
                return Err((PlannerError::Infeasible { family: fam }, Some(fam)));
            }
        }

        // Reachable cells forward from the admissible first-step cells, with
        // transition tables restricted to them.
        let mut trans: Vec<Vec<Vec<(Cell, W)>>> = Vec::with_capacity(n_cav * n_steps);
        let mut reach = vec![vec![false; n_cells]; n_slots];
        let mut trans_reject = Rejections(Vec::new());
        for cav in 0..n_cav {
            let s1 = slot_of(n_steps, cav, 1);
            reach[s1] = unary[s1].clone();
            for k in 1..n_steps {
                let (sa, sb) = (slot_of(n_steps, cav, k), slot_of(n_steps, cav, k + 1));
                let rows = pair_rows.get(&(sa, sb)).map(Vec::as_slice).unwrap_or(&[]);
                let costs = pair_costs.get(&(sa, sb)).map(Vec::as_slice).unwrap_or(&[]);
                let mut table = vec![Vec::new(); n_cells];
                for a in 0..n_cells {
                    if !reach[sa][a] {
                        continue;
                    }
                    for b in 0..n_cells {
                        if !unary[sb][b] {
                            continue;
                        }
                        let cell_of = |s: usize| Some(if s == sa { a as Cell } else { b as Cell });
                        if let Some((_, _, _, fam)) = rows
                            .iter()
                            .find(|(t, sense, rhs, _)| !sense_ok(*sense, row_lhs(t, n_cols, cell_of), *rhs))
                        {
                            trans_reject.note(*fam);
                            continue;
                        }
                        let cost = costs.iter().fold(W::zero(), |acc, (t, w)| {
                            if row_lhs(std::slice::from_ref(t), n_cols, cell_of) != 0 {
                                acc + *w
                            } else {
                                acc
                            }
                        });
                        table[a].push((b as Cell, cost));
                        reach[sb][b] = true;
                    }
                }
                trans.push(table);
            }
            trans.push(Vec::new());
        }

        // Cheapest per-CAV completions, backward.
        let mut h: Vec<Vec<Vec<Option<W>>>> = vec![vec![vec![None; n_cells]; n_steps + 1]; n_cav];
        for cav in 0..n_cav {
            let sn = slot_of(n_steps, cav, n_steps);
            for c in 0..n_cells {
                if reach[sn][c] {
                    h[cav][n_steps][c] = Some(W::zero());
                }
            }
            for k in (1..n_steps).rev() {
                let table = &trans[cav * n_steps + (k - 1)];
                let sb = slot_of(n_steps, cav, k + 1);
                for a in 0..n_cells {
                    let mut best: Option<W> = None;
                    for &(b, cost) in &table[a] {
                        if let Some(hb) = h[cav][k + 1][b as usize] {
                            let v = cost + unary_cost[sb][b as usize] + hb;
                            if best.is_none_or(|x| v < x) {
                                best = Some(v);
                            }
                        }
                    }
                    h[cav][k][a] = best;
                }
            }
            let s1 = slot_of(n_steps, cav, 1);
            if !(0..n_cells).any(|c| reach[s1][c] && h[cav][1][c].is_some()) {
                let fam = trans_reject.worst().or(rejected.worst()).unwrap_or(Family::RowJump);
                return Err((PlannerError::Infeasible { family: fam }, Some(fam)));
            }
        }

        // Which general rows need checking for each (slot, cell).
        let order = |slot: usize| (step_of(slot) - 1) * n_cav + cav_of(slot);
        let mut checks = vec![vec![Vec::new(); n_cells]; n_slots];
        for (r, terms) in general.iter().enumerate() {
            let last = terms
                .iter()
                .flat_map(term_slots)
                .flatten()
                .max_by_key(|&s| order(s))
                .expect("general row touches slots");
            let (sense, rhs, _) = general_rows[r];
            let (mut other_min, mut other_max) = (0i64, 0i64);
            for t in terms {
                let touches_last = term_slots(t).contains(&Some(last));
                let coef = match *t {
                    Term::Occ { coef, .. } | Term::Diff { coef, .. } => coef,
                };
                if !touches_last {
                    other_min += coef.min(0);
                    other_max += coef.max(0);
                }
            }
            for c in 0..n_cells {
                if !reach[last][c] {
                    continue;
                }
                // Contribution of terms that only involve the last slot.
                let mut own = 0i64;
                let mut mixed_min = 0i64;
                let mut mixed_max = 0i64;
                for t in terms {
                    match *t {
                        Term::Occ { slot, pred, coef } if slot == last => {
                            own += coef * i64::from(pred.holds(n_cols, c as Cell));
                        }
                        Term::Diff { a, b, coef } if a.0 == last || b.0 == last => {
                            mixed_min += coef.min(0);
                            mixed_max += coef.max(0);
                        }
                        _ => {}
                    }
                }
                let lo = own + other_min + mixed_min;
                let hi = own + other_max + mixed_max;
                let guaranteed = match sense {
                    Sense::Le => hi <= rhs,
                    Sense::Ge => lo >= rhs,
                    Sense::Eq => lo == rhs && hi == rhs,
                };
                if !guaranteed {
                    checks[last][c].push(r);
                }
            }
        }

        Ok(Self {
            n_cav,
            n_steps,
            n_cols,
            n_cells,
            unary: reach,
            unary_cost,
            trans,
            general,
            general_rows,
            checks,
            h,
            memo_ok,
        })
    }
}

struct Search<'m, W> {
    m: &'m Model<W>,
    limits: SolveLimits,
    started: Instant,
    /// Current cell per slot (indexed by slot id), `None` if unassigned.
    cells: Vec<Option<Cell>>,
    best: Option<(W, Vec<Cell>)>,
    memo: HashMap<Vec<Cell>, W>,
    stats: SolveStats,
    general_reject: Rejections,
    out_of_budget: bool,
    /// Optimal cost, once known: the search then looks for the
    /// lexicographically first plan attaining it.
    target: Option<W>,
    found: bool,
}

impl<W: Weight> Search<'_, W> {
    fn slot(&self, cav: usize, k: usize) -> usize {
        slot_of(self.m.n_steps, cav, k)
    }

    fn budget_hit(&mut self) -> bool {
        if self.stats.nodes >= self.limits.max_nodes {
            self.out_of_budget = true;
        } else if let Some(limit) = self.limits.time_limit {
            if self.stats.nodes.is_multiple_of(4096) && self.started.elapsed() > limit {
                self.out_of_budget = true;
            }
        }
        self.out_of_budget
    }

    fn rows_hold(&mut self, slot: usize, cell: Cell) -> bool {
        let m = self.m;
        for &r in &m.checks[slot][cell as usize] {
            let (sense, rhs, fam) = m.general_rows[r];
            let lhs = row_lhs(&m.general[r], m.n_cols, |s| self.cells[s]);
            if !sense_ok(sense, lhs, rhs) {
                self.general_reject.note(fam);
                return false;
            }
        }
        true
    }

    /// `pos` enumerates slots in (step, cav) order; `h_cur[cav]` is the
    /// completion bound of each CAV from its last fixed step.
    fn dfs(&mut self, pos: usize, g: W, h_cur: &mut Vec<W>) {
        if self.out_of_budget || self.found {
            return;
        }
        let m = self.m;
        let total = m.n_cav * m.n_steps;
        if pos == total {
            let take = match self.target {
                Some(t) => g <= t,
                None => self.best.as_ref().is_none_or(|(b, _)| g < *b),
            };
            if take {
                self.found = self.target.is_some();
                let cells = (0..total).map(|s| self.cells[s].expect("complete")).collect();
                self.best = Some((g, cells));
                self.stats.incumbents += 1;
            }
            return;
        }
        let k = pos / m.n_cav + 1;
        let cav = pos % m.n_cav;
        if cav == 0 && k > 1 && m.memo_ok {
            let key: Vec<Cell> = std::iter::once((k - 1) as Cell)
                .chain((0..m.n_cav).map(|i| self.cells[self.slot(i, k - 1)].expect("assigned")))
                .collect();
            match self.memo.get(&key) {
                Some(&seen) if seen <= g => {
                    self.stats.memo_hits += 1;
                    return;
                }
                _ => {
                    if self.memo.len() < self.limits.max_memo || self.memo.contains_key(&key) {
                        self.memo.insert(key, g);
                    }
                }
            }
        }
        let slot = self.slot(cav, k);
        let mut children: Vec<(W, Cell, W)> = Vec::new();
        if k == 1 {
            for c in 0..m.n_cells {
                if m.unary[slot][c] {
                    if let Some(hc) = m.h[cav][1][c] {
                        children.push((m.unary_cost[slot][c], c as Cell, hc));
                    }
                }
            }
        } else {
            let prev = self.cells[self.slot(cav, k - 1)].expect("previous step fixed");
            for &(b, cost) in &m.trans[cav * m.n_steps + (k - 2)][prev as usize] {
                if let Some(hb) = m.h[cav][k][b as usize] {
                    children.push((cost + m.unary_cost[slot][b as usize], b, hb));
                }
            }
        }
        if self.target.is_some() {
            children.sort_by_key(|x| std::cmp::Reverse(x.1));
        } else {
            children.sort_by(|x, y| {
                let (fx, fy) = (x.0 + x.2, y.0 + y.2);
                fx.partial_cmp(&fy)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(x.1.cmp(&y.1))
            });
        }
        let saved_h = h_cur[cav];
        for (step_cost, cell, hc) in children {
            self.stats.nodes += 1;
            if self.budget_hit() {
                return;
            }
            let g2 = g + step_cost;
            h_cur[cav] = hc;
            let bound = h_cur.iter().fold(g2, |acc, &x| acc + x);
            let pruned = match (&self.target, &self.best) {
                (Some(t), _) => bound > *t,
                (None, Some((b, _))) => bound >= *b,
                (None, None) => false,
            };
            if pruned {
                self.stats.bound_prunes += 1;
                continue;
            }
            self.cells[slot] = Some(cell);
            if self.rows_hold(slot, cell) {
                self.dfs(pos + 1, g2, h_cur);
            }
            self.cells[slot] = None;
            if self.out_of_budget || self.found {
                break;
            }
        }
        h_cur[cav] = saved_h;
    }
}

/// Solves `program` to proven optimality.
pub fn solve<W: Weight>(
    program: &BinaryProgram<W>,
    limits: SolveLimits,
) -> Result<(OccupancyPlan<W>, SolveStats), PlannerError> {
    let m = Model::build(program).map_err(|(e, _)| e)?;
    let total = m.n_cav * m.n_steps;
    let mut search = Search {
        m: &m,
        limits,
        started: Instant::now(),
        cells: vec![None; total],
        best: None,
        memo: HashMap::new(),
        stats: SolveStats::default(),
        general_reject: Rejections(Vec::new()),
        out_of_budget: false,
        target: None,
        found: false,
    };
    // Before step 1 nothing is fixed, so each CAV's bound is its best start
    // including the step-1 cost.
    let h_start: Vec<W> = (0..m.n_cav)
        .map(|cav| {
            let s = slot_of(m.n_steps, cav, 1);
            (0..m.n_cells)
                .filter_map(|c| {
                    m.h[cav][1][c]
                        .filter(|_| m.unary[s][c])
                        .map(|h| h + m.unary_cost[s][c])
                })
                .fold(None, |acc: Option<W>, v| Some(match acc {
                    Some(a) if a <= v => a,
                    _ => v,
                }))
                .unwrap_or(W::zero())
        })
        .collect();
    search.dfs(0, W::zero(), &mut h_start.clone());
    if let Some((opt, _)) = &search.best {
        if !search.out_of_budget {
            let first_optimal = search.best.clone();
            search.target = Some(*opt);
            search.memo.clear();
            search.dfs(0, W::zero(), &mut h_start.clone());
            // Rounding can hide the optimum from the second pass; keep the
            // first pass's plan then.
            if !search.found {
                search.best = first_optimal;
            }
        }
    }
    let stats = search.stats.clone();
    debug!("branch-and-bound: {stats:?}");
    if search.out_of_budget {
        return Err(PlannerError::BudgetExhausted { nodes: stats.nodes });
    }
    let (_, flat) = search.best.ok_or_else(|| PlannerError::Infeasible {
        family: search.general_reject.worst().unwrap_or(Family::CavCollision),
    })?;
    let l = program.layout;
    let cells: Vec<Vec<CellIndex>> = (0..l.n_cav)
        .map(|cav| {
            (1..=l.n_steps)
                .map(|k| {
                    let c = flat[slot_of(l.n_steps, cav, k)] as usize;
                    CellIndex::new(c / l.n_cols + 1, c % l.n_cols + 1)
                })
                .collect()
        })
        .collect();
    let objective = program.evaluate(&program.assignment_for(&cells));
    Ok((
        OccupancyPlan {
            cells,
            horizon: l.n_steps,
            objective,
        },
        stats,
    ))
}

//! Sum-product over the indicators `z`, compiled once per model structure.
//!
//! The schedule (which tables meet at each elimination and how their entries
//! line up) depends only on the scopes, so it is built once and replayed for
//! every data point and every parameter value.

use crate::error::{CdfError, Result};
use crate::model::CdnModel;

use super::order::EliminationOrder;
use super::terms::FactorTerms;

/// Default cap on the induced width.
pub const DEFAULT_TREEWIDTH_CAP: usize = 12;
pub const MAX_TREEWIDTH_CAP: usize = 30;

#[derive(Debug, Clone)]
struct FactorTable {
    factor: usize,
    /// Scope positions of free indicators (ascending variable index).
    free_positions: Vec<usize>,
    /// Scope positions whose indicator can only point at this factor.
    fixed_positions: Vec<usize>,
    /// For every entry, the bitmask over `free_positions` of indicators equal to this factor.
    entry_masks: Vec<u32>,
}

#[derive(Debug, Clone)]
struct Step {
    inputs: Vec<usize>,
    output: usize,
    /// Axis sizes of the combined iteration space; the eliminated variable is last.
    dims: Vec<usize>,
    /// `strides[k][axis]` for input `k`; 0 when the input lacks the axis.
    strides: Vec<Vec<usize>>,
}

/// A compiled variable-elimination schedule.
#[derive(Debug, Clone)]
pub struct EliminationPlan {
    p: usize,
    num_factors: usize,
    width: usize,
    table_sizes: Vec<usize>,
    factor_tables: Vec<FactorTable>,
    steps: Vec<Step>,
    /// Tables never consumed by a step; each holds a single entry at the end.
    results: Vec<usize>,
}

/// Reusable scratch space for [`EliminationPlan::log_density`].
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    tables: Vec<Vec<f64>>,
    terms: FactorTerms,
    ln_u: Vec<f64>,
    buf: Vec<f64>,
    idx: Vec<usize>,
    offs: Vec<usize>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EliminationPlan {
    pub fn new(model: &CdnModel, order: &EliminationOrder, treewidth_cap: usize) -> Result<Self> {
        if treewidth_cap > MAX_TREEWIDTH_CAP {
            return Err(CdfError::Argument(format!(
                "treewidth cap {treewidth_cap} exceeds the supported maximum {MAX_TREEWIDTH_CAP}"
            )));
        }
        if order.order().len() != model.p() {
            return Err(CdfError::Argument("order does not match the model".into()));
        }
        let z = model.z_domains();
        let p = model.p();
        let free: Vec<bool> = (0..p).map(|i| z.domain(i).len() > 1).collect();

        // table id -> (ascending free variables)
        let mut table_vars: Vec<Vec<usize>> = Vec::new();
        let mut table_sizes = Vec::new();
        let mut factor_tables = Vec::with_capacity(model.num_factors());
        for (j, f) in model.factors().iter().enumerate() {
            let (free_positions, fixed_positions): (Vec<usize>, Vec<usize>) =
                (0..f.scope().len()).partition(|&pos| free[f.scope()[pos]]);
            let vars: Vec<usize> = free_positions.iter().map(|&pos| f.scope()[pos]).collect();
            if vars.len() > treewidth_cap + 1 {
                return Err(CdfError::TreewidthTooLarge {
                    variable: vars[0],
                    clique: vars.clone(),
                    width: vars.len() - 1,
                    cap: treewidth_cap,
                });
            }
            let dims: Vec<usize> = vars.iter().map(|&v| z.domain(v).len()).collect();
            let size: usize = dims.iter().product();
            // row-major, last variable fastest
            let mut entry_masks = Vec::with_capacity(size);
            let mut idx = vec![0usize; vars.len()];
            for _ in 0..size {
                let mut mask = 0u32;
                for (b, &v) in vars.iter().enumerate() {
                    if z.domain(v)[idx[b]] == j {
                        mask |= 1 << b;
                    }
                }
                entry_masks.push(mask);
                for ax in (0..idx.len()).rev() {
                    idx[ax] += 1;
                    if idx[ax] < dims[ax] {
                        break;
                    }
                    idx[ax] = 0;
                }
            }
            factor_tables.push(FactorTable {
                factor: j,
                free_positions,
                fixed_positions,
                entry_masks,
            });
            table_vars.push(vars);
            table_sizes.push(size);
        }

        // variable -> live tables mentioning it
        let mut holders: Vec<Vec<usize>> = vec![Vec::new(); p];
        for (t, vars) in table_vars.iter().enumerate() {
            for &v in vars {
                holders[v].push(t);
            }
        }
        let mut consumed = vec![false; table_vars.len()];
        let mut steps = Vec::new();
        let mut width = 0;
        for &v in order.order() {
            if !free[v] {
                continue;
            }
            let inputs: Vec<usize> = holders[v].iter().copied().filter(|&t| !consumed[t]).collect();
            let mut out_vars: Vec<usize> = inputs
                .iter()
                .flat_map(|&t| table_vars[t].iter().copied())
                .filter(|&x| x != v)
                .collect();
            out_vars.sort_unstable();
            out_vars.dedup();
            if out_vars.len() > treewidth_cap {
                let mut clique = vec![v];
                clique.extend(&out_vars);
                return Err(CdfError::TreewidthTooLarge {
                    variable: v,
                    clique,
                    width: out_vars.len(),
                    cap: treewidth_cap,
                });
            }
            width = width.max(out_vars.len());
            let mut axes = out_vars.clone();
            axes.push(v);
            let dims: Vec<usize> = axes.iter().map(|&x| z.domain(x).len()).collect();
            let strides = inputs
                .iter()
                .map(|&t| {
                    let vars = &table_vars[t];
                    // row-major strides of table t
                    let mut own = vec![0usize; vars.len()];
                    let mut s = 1;
                    for b in (0..vars.len()).rev() {
                        own[b] = s;
                        s *= z.domain(vars[b]).len();
                    }
                    axes.iter()
                        .map(|x| vars.iter().position(|y| y == x).map_or(0, |b| own[b]))
                        .collect()
                })
                .collect();
            for &t in &inputs {
                consumed[t] = true;
            }
            let output = table_vars.len();
            for &x in &out_vars {
                holders[x].push(output);
            }
            table_sizes.push(dims[..dims.len() - 1].iter().product());
            table_vars.push(out_vars);
            consumed.push(false);
            steps.push(Step {
                inputs,
                output,
                dims,
                strides,
            });
        }
        let results = (0..table_vars.len()).filter(|&t| !consumed[t]).collect();
        Ok(EliminationPlan {
            p,
            num_factors: model.num_factors(),
            width,
            table_sizes,
            factor_tables,
            steps,
            results,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Log density of the model at `u`. The model must have the structure the
    /// plan was compiled for; parameters may differ.
    pub fn log_density(&self, model: &CdnModel, u: &[f64], ws: &mut Workspace) -> Result<f64> {
        if model.p() != self.p || model.num_factors() != self.num_factors {
            return Err(CdfError::Argument("plan was compiled for a different model".into()));
        }
        super::ln_interior(u, &mut ws.ln_u)?;
        ws.terms.fill(model, &ws.ln_u);
        if ws.tables.len() < self.table_sizes.len() {
            ws.tables.resize_with(self.table_sizes.len(), Vec::new);
        }
        for (t, ft) in self.factor_tables.iter().enumerate() {
            let f = model.factor(ft.factor);
            let (shared, coords) = ws.terms.factor(ft.factor);
            let (m0, base) = ft
                .fixed_positions
                .iter()
                .fold((0usize, 0.0), |(m, s), &pos| (m + 1, s + coords[pos]));
            let table = &mut ws.tables[t];
            table.clear();
            for &mask in &ft.entry_masks {
                let mut m = m0;
                let mut sum = base;
                let mut bits = mask;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    sum += coords[ft.free_positions[b]];
                    m += 1;
                    bits &= bits - 1;
                }
                table.push(f.copula().log_partial_from(shared, m, sum));
            }
        }
        for step in &self.steps {
            self.run_step(step, ws);
        }
        Ok(self.results.iter().map(|&t| ws.tables[t][0]).sum())
    }

    fn run_step(&self, step: &Step, ws: &mut Workspace) {
        let naxes = step.dims.len();
        let d = step.dims[naxes - 1];
        let total: usize = step.dims.iter().product();
        let mut out = std::mem::take(&mut ws.tables[step.output]);
        out.clear();
        ws.buf.clear();
        ws.idx.clear();
        ws.idx.resize(naxes, 0);
        ws.offs.clear();
        ws.offs.resize(step.inputs.len(), 0);
        for c in 0..total {
            let mut s = 0.0;
            for (k, &t) in step.inputs.iter().enumerate() {
                s += ws.tables[t][ws.offs[k]];
            }
            ws.buf.push(s);
            if ws.buf.len() == d {
                out.push(crate::numeric::log_sum_exp(&ws.buf));
                ws.buf.clear();
            }
            if c + 1 == total {
                break;
            }
            for ax in (0..naxes).rev() {
                ws.idx[ax] += 1;
                for (k, st) in step.strides.iter().enumerate() {
                    ws.offs[k] += st[ax];
                }
                if ws.idx[ax] < step.dims[ax] {
                    break;
                }
                for (k, st) in step.strides.iter().enumerate() {
                    ws.offs[k] -= st[ax] * step.dims[ax];
                }
                ws.idx[ax] = 0;
            }
        }
        ws.tables[step.output] = out;
    }
}

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::table::{RayTable, Stencil};
use super::{RowEvaluator, Symbol, SymbolClass};
use crate::cutoff::cutoff_chi;
use crate::grid::{norm, Grid, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// p^R = −χ(|ξ|)J.
    Raw,
    /// p_e^R = ½(p^R(x, ξ) + p^R(x, −ξ)).
    Even,
    /// k = exp(exponent).
    ExpPlus,
    /// k̃ = exp(−exponent).
    ExpMinus,
}

/// A symbol read from a ray table. The exponent of the exponential kinds is p_e^R, or p^R when
/// `symmetrize` is off.
#[derive(Clone, Debug)]
pub struct TableSymbol {
    table: Arc<RayTable>,
    kind: TableKind,
    symmetrize: bool,
}

impl TableSymbol {
    pub fn new(table: Arc<RayTable>, kind: TableKind, symmetrize: bool) -> Self {
        Self { table, kind, symmetrize }
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn table(&self) -> &Arc<RayTable> {
        &self.table
    }

    #[inline]
    fn combine(&self, chi: f64, j_plus: Complex64, j_minus: Complex64) -> Complex64 {
        let p = -chi * j_plus;
        let exponent = match self.kind {
            TableKind::Raw => return p,
            TableKind::Even => return (p + (-chi * j_minus)) * 0.5,
            _ if self.symmetrize => (p + (-chi * j_minus)) * 0.5,
            _ => p,
        };
        match self.kind {
            TableKind::ExpPlus => exponent.exp(),
            _ => (-exponent).exp(),
        }
    }

    fn needs_reflection(&self) -> bool {
        self.kind == TableKind::Even || (self.symmetrize && matches!(self.kind, TableKind::ExpPlus | TableKind::ExpMinus))
    }
}

impl Symbol for TableSymbol {
    fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        let n = self.table.grid().dim();
        let chi = cutoff_chi(norm(&xi[..n]));
        if chi == 0.0 || self.table.is_zero() {
            return self.combine(0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let jp = self.table.integral_at(x, xi);
        let jm = if self.needs_reflection() {
            let mut neg = [0.0; MAX_DIM];
            for d in 0..n {
                neg[d] = -xi[d];
            }
            self.table.integral_at(x, &neg[..n])
        } else {
            Complex64::new(0.0, 0.0)
        };
        self.combine(chi, jp, jm)
    }
    fn order(&self) -> f64 {
        0.0
    }
    fn class(&self) -> SymbolClass {
        SymbolClass::Classical
    }
    fn row_evaluator<'a>(&'a self, grid: &Grid) -> Option<Box<dyn RowEvaluator + 'a>> {
        if !grid.same_as(self.table.grid()) {
            return None;
        }
        let n = grid.dim();
        let reflect = self.needs_reflection();
        let dirs = self.table.directions();
        let mut slots = Vec::with_capacity(grid.len());
        let mut xi = [0.0; MAX_DIM];
        for i in 0..grid.len() {
            grid.frequency(i, &mut xi);
            let r = norm(&xi[..n]);
            let chi = cutoff_chi(r);
            let plus = dirs.stencil(&xi[..n]);
            let minus = if reflect {
                let mut neg = [0.0; MAX_DIM];
                for d in 0..n {
                    neg[d] = -xi[d];
                }
                dirs.stencil(&neg[..n])
            } else {
                Stencil::default()
            };
            slots.push(SlotLookup { chi, plus, minus, rad: self.table.radial_stencil(r) });
        }
        Some(Box::new(TableRows { sym: self, slots, reflect }))
    }
}

struct SlotLookup {
    chi: f64,
    plus: Stencil,
    minus: Stencil,
    rad: [(usize, f64); 2],
}

struct TableRows<'a> {
    sym: &'a TableSymbol,
    slots: Vec<SlotLookup>,
    reflect: bool,
}

impl RowEvaluator for TableRows<'_> {
    fn fill(&self, x_index: usize, range: Range<usize>, out: &mut [Complex64]) {
        let zero = Complex64::new(0.0, 0.0);
        let table = &self.sym.table;
        let trivial = table.is_zero();
        for (o, i) in out.iter_mut().zip(range) {
            let s = &self.slots[i];
            if s.chi == 0.0 || trivial {
                *o = self.sym.combine(0.0, zero, zero);
                continue;
            }
            let jp = table.lookup(x_index, &s.plus, &s.rad);
            let jm = if self.reflect { table.lookup(x_index, &s.minus, &s.rad) } else { zero };
            *o = self.sym.combine(s.chi, jp, jm);
        }
    }
}

/// The integrating-factor symbols built from one ray table.
#[derive(Clone, Debug)]
pub struct IntegratingFactor {
    pub p_r: Arc<TableSymbol>,
    pub p_e_r: Arc<TableSymbol>,
    pub k_plus: Arc<TableSymbol>,
    pub k_minus: Arc<TableSymbol>,
    pub ray_tolerance: f64,
    pub symmetrize: bool,
}

impl IntegratingFactor {
    pub fn from_table(table: Arc<RayTable>, symmetrize: bool) -> Self {
        let make = |kind| Arc::new(TableSymbol::new(table.clone(), kind, symmetrize));
        Self {
            p_r: make(TableKind::Raw),
            p_e_r: make(TableKind::Even),
            k_plus: make(TableKind::ExpPlus),
            k_minus: make(TableKind::ExpMinus),
            ray_tolerance: table.key().tol,
            symmetrize,
        }
    }

    pub fn table(&self) -> &Arc<RayTable> {
        self.p_r.table()
    }

    /// True when K = K̃ = I.
    pub fn is_identity(&self) -> bool {
        self.table().is_zero()
    }
}

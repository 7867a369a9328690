//! Slack budgets from refinement ladders.

use crate::error::{Error, Result};
use crate::torus::io::fmt_f64;

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementRow {
    pub n: usize,
    pub value: f64,
    /// `|value(n) - value(n/2)|`, NaN on the coarsest grid.
    pub change: f64,
}

/// A scalar measured on successively doubled grids.
#[derive(Clone, Debug, PartialEq)]
pub struct GridRefinement {
    pub rows: Vec<RefinementRow>,
    /// Changes below this count as converged to roundoff.
    pub floor: f64,
}

impl GridRefinement {
    /// Every change is at most half the previous one, or below the floor.
    pub fn halving(&self) -> bool {
        self.rows
            .windows(2)
            .skip(1)
            .all(|w| w[1].change <= 0.5 * w[0].change || w[1].change <= self.floor)
    }

    /// Error estimate on the finest grid: the last change.
    pub fn error_estimate(&self) -> f64 {
        self.rows.last().map_or(f64::INFINITY, |r| r.change)
    }

    pub fn finest(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.value)
    }

    /// Whether `slack` covers the finest-grid `needed` amount plus the error estimate.
    pub fn justifies(&self, slack: f64, needed: f64) -> bool {
        self.halving() && needed.max(0.0) + self.error_estimate() <= slack
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,value,change\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.n, fmt_f64(r.value), fmt_f64(r.change)));
        }
        s
    }
}

pub fn grid_refinement(
    ns: &[usize],
    floor: f64,
    mut measure: impl FnMut(usize) -> Result<f64>,
) -> Result<GridRefinement> {
    if ns.len() < 2 || ns.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Domain("refinement ladder needs at least two doubling sizes".into()));
    }
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(ns.len());
    for &n in ns {
        let value = measure(n)?;
        let change = rows.last().map_or(f64::NAN, |p| (value - p.value).abs());
        rows.push(RefinementRow { n, value, change });
    }
    Ok(GridRefinement { rows, floor })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsLadderRow {
    pub eps: f64,
    /// Largest item value at this `eps`.
    pub max_value: f64,
    /// Largest itemwise change from the previous rung (NaN on the first).
    pub max_change: f64,
    /// Largest `value + change` over items, floored at zero.
    pub budget: f64,
}

/// Itemwise values (one per step, say) on a decreasing `eps` ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonLadder {
    pub rows: Vec<EpsLadderRow>,
}

impl EpsilonLadder {
    /// Slack budget at the finest rung.
    pub fn budget(&self) -> f64 {
        self.rows.last().map_or(f64::INFINITY, |r| r.budget)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,max_value,max_change,budget\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(r.eps),
                fmt_f64(r.max_value),
                fmt_f64(r.max_change),
                fmt_f64(r.budget)
            ));
        }
        s
    }
}

pub fn epsilon_ladder(
    eps: &[f64],
    mut measure: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<EpsilonLadder> {
    if eps.len() < 2 || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("eps ladder needs at least two decreasing values".into()));
    }
    let mut rows = Vec::with_capacity(eps.len());
    let mut prev: Option<Vec<f64>> = None;
    for &e in eps {
        let vals = measure(e)?;
        if let Some(p) = &prev {
            if p.len() != vals.len() {
                return Err(Error::Cardinality(p.len(), vals.len()));
            }
        }
        let max_value = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (max_change, budget) = match &prev {
            None => (f64::NAN, f64::NAN),
            Some(p) => vals.iter().zip(p).fold((0.0_f64, 0.0_f64), |(mc, b), (v, q)| {
                let ch = (v - q).abs();
                (mc.max(ch), b.max(v + ch))
            }),
        };
        rows.push(EpsLadderRow { eps: e, max_value, max_change, budget });
        prev = Some(vals);
    }
    Ok(EpsilonLadder { rows })
}

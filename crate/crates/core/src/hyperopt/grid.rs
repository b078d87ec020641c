use super::{ParamDomain, ParamValue, Params, SearchSpace};
use crate::{Error, Result};

/// Number of distinct values a dimension can take, if finite.
fn cardinality(d: &ParamDomain) -> Option<u64> {
    match d {
        ParamDomain::Categorical { values } => Some(values.len() as u64),
        ParamDomain::Discrete { lo, hi } => Some((hi - lo) as u64 + 1),
        _ => None,
    }
}

/// Per-dimension grid sizes: categorical dimensions take their full
/// cardinality, the rest grow round-robin while the product stays within
/// `budget`.
pub fn grid_sizes(space: &SearchSpace, budget: usize) -> Result<Vec<usize>> {
    if budget == 0 {
        return Err(Error::Budget("grid search needs a budget of at least 1".into()));
    }
    let budget = budget as u64;
    let mut sizes: Vec<u64> = space
        .dims()
        .iter()
        .map(|(_, d)| match d {
            ParamDomain::Categorical { values } => values.len() as u64,
            _ => 1,
        })
        .collect();
    let fixed: u64 = sizes.iter().try_fold(1u64, |acc, &s| acc.checked_mul(s)).unwrap_or(u64::MAX);
    if fixed > budget {
        return Err(Error::Budget(format!("categorical combinations ({fixed}) exceed the budget ({budget})")));
    }
    let numeric: Vec<usize> = space
        .dims()
        .iter()
        .enumerate()
        .filter(|(_, (_, d))| !matches!(d, ParamDomain::Categorical { .. }))
        .map(|(i, _)| i)
        .collect();
    let mut product = fixed;
    loop {
        let mut grew = false;
        for &i in &numeric {
            let cap = cardinality(&space.dims()[i].1).unwrap_or(u64::MAX);
            let next = product / sizes[i] * (sizes[i] + 1);
            if sizes[i] < cap && next <= budget {
                product = next;
                sizes[i] += 1;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    Ok(sizes.into_iter().map(|s| s as usize).collect())
}

/// `n` evenly spaced values of a dimension. A single point sits at the
/// middle of a numeric range.
fn axis(d: &ParamDomain, n: usize) -> Vec<ParamValue> {
    let t = |i: usize| if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
    match d {
        ParamDomain::Categorical { values } => values.clone(),
        ParamDomain::Continuous { lo, hi } => (0..n).map(|i| ParamValue::Real(lo + t(i) * (hi - lo))).collect(),
        ParamDomain::LogContinuous { lo, hi } => (0..n)
            .map(|i| {
                let x = if i == 0 {
                    *lo
                } else if i + 1 == n && n > 1 {
                    *hi
                } else {
                    (lo.ln() + t(i) * (hi.ln() - lo.ln())).exp()
                };
                ParamValue::Real(x)
            })
            .collect(),
        ParamDomain::Discrete { lo, hi } => {
            (0..n).map(|i| ParamValue::Int(*lo + (t(i) * (hi - lo) as f64).round() as i64)).collect()
        }
    }
}

/// Cartesian grid with at most `budget` points, in lexicographic order (the
/// first dimension varies slowest).
pub fn grid_enumerate(space: &SearchSpace, budget: usize) -> Result<Vec<Params>> {
    let sizes = grid_sizes(space, budget)?;
    let axes: Vec<Vec<ParamValue>> = space.dims().iter().zip(&sizes).map(|((_, d), &n)| axis(d, n)).collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        out.push(space.dims().iter().zip(&axes).zip(&idx).map(|(((n, _), a), &i)| (n.clone(), a[i].clone())).collect());
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}

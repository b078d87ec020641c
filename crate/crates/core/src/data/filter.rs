use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::InteractionDataset;
use crate::{Error, Result};

/// The L-core: the unique maximal sub-matrix where every user and every item
/// has at least `l` interactions. Computed by queue-based degree peeling.
pub fn l_core(dataset: &InteractionDataset, l: usize) -> Result<InteractionDataset> {
    if l == 0 {
        return Err(Error::domain("L must be at least 1"));
    }
    let m = dataset.matrix();
    let t = m.transpose();
    let mut user_deg = m.row_degrees();
    let mut item_deg = m.col_degrees();
    let mut user_alive = vec![true; m.n_rows()];
    let mut item_alive = vec![true; m.n_cols()];

    enum Vertex {
        User(usize),
        Item(usize),
    }
    let mut queue = VecDeque::new();
    for (u, &d) in user_deg.iter().enumerate() {
        if d < l {
            user_alive[u] = false;
            queue.push_back(Vertex::User(u));
        }
    }
    for (i, &d) in item_deg.iter().enumerate() {
        if d < l {
            item_alive[i] = false;
            queue.push_back(Vertex::Item(i));
        }
    }
    while let Some(v) = queue.pop_front() {
        match v {
            Vertex::User(u) => {
                for &i in m.row(u) {
                    let i = i as usize;
                    if item_alive[i] {
                        item_deg[i] -= 1;
                        if item_deg[i] < l {
                            item_alive[i] = false;
                            queue.push_back(Vertex::Item(i));
                        }
                    }
                }
            }
            Vertex::Item(i) => {
                for &u in t.row(i) {
                    let u = u as usize;
                    if user_alive[u] {
                        user_deg[u] -= 1;
                        if user_deg[u] < l {
                            user_alive[u] = false;
                            queue.push_back(Vertex::User(u));
                        }
                    }
                }
            }
        }
    }
    Ok(dataset.retain(&user_alive, &item_alive))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    UserFirst,
    ItemFirst,
}

impl fmt::Display for FilterOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterOrder::UserFirst => "user_first",
            FilterOrder::ItemFirst => "item_first",
        })
    }
}

impl FromStr for FilterOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user_first" | "user-first" => Ok(FilterOrder::UserFirst),
            "item_first" | "item-first" => Ok(FilterOrder::ItemFirst),
            _ => Err(Error::domain(format!("unknown filter order {s:?}"))),
        }
    }
}

/// One user-degree filter and one item-degree filter, applied in sequence.
/// The second filter sees degrees after the first has run. The result is
/// order-dependent and generally not an L-core.
pub fn single_pass_filter(
    dataset: &InteractionDataset,
    l: usize,
    order: FilterOrder,
) -> Result<InteractionDataset> {
    if l == 0 {
        return Err(Error::domain("L must be at least 1"));
    }
    let by_users = |d: &InteractionDataset| {
        let keep: Vec<bool> = d.user_degrees().iter().map(|&x| x >= l).collect();
        d.retain(&keep, &vec![true; d.n_items()])
    };
    let by_items = |d: &InteractionDataset| {
        let keep: Vec<bool> = d.item_degrees().iter().map(|&x| x >= l).collect();
        d.retain(&vec![true; d.n_users()], &keep)
    };
    Ok(match order {
        FilterOrder::UserFirst => by_items(&by_users(dataset)),
        FilterOrder::ItemFirst => by_users(&by_items(dataset)),
    })
}

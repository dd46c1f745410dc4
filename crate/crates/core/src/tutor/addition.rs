//! Multi-column addition. Columns are numbered from the right starting at
//! 1; `carry{i}` holds the carry out of column `i` and sits above column
//! `i + 1`. With `n` digit columns the board has `n` carry cells, `n + 1`
//! answer cells and a done button under the leftmost answer cell.

use crate::error::Result;
use crate::model::InterfaceState;

use super::{done_step, filled, grid_state, step, Cell, HintPackage};

const W: f64 = 50.0;

fn col_x(n: usize, col: usize) -> f64 {
    (n + 1 - col) as f64 * W
}

pub(crate) fn initial_state(a: &str, b: &str) -> Result<InterfaceState> {
    let n = a.len();
    let da: Vec<char> = a.chars().rev().collect();
    let db: Vec<char> = b.chars().rev().collect();
    let mut cells = Vec::new();
    for i in 1..=n {
        cells.push(Cell::open(format!("carry{i}"), col_x(n, i + 1), 0.0));
    }
    for i in 1..=n {
        cells.push(Cell::given(format!("inpA{i}"), da[i - 1].to_string(), col_x(n, i), W));
        cells.push(Cell::given(format!("inpB{i}"), db[i - 1].to_string(), col_x(n, i), 2.0 * W));
    }
    for i in 1..=n + 1 {
        cells.push(Cell::open(format!("out{i}"), col_x(n, i), 3.0 * W));
    }
    cells.push(Cell::button("done", col_x(n, n + 1), 4.0 * W));
    grid_state(cells)
}

struct Column {
    sum: u32,
    carry_in: bool,
}

fn columns(a: &str, b: &str) -> Vec<Column> {
    let da = a.bytes().rev().map(|c| (c - b'0') as u32);
    let db = b.bytes().rev().map(|c| (c - b'0') as u32);
    let mut carry = 0;
    let mut out = Vec::new();
    for (x, y) in da.zip(db) {
        let sum = x + y + carry;
        out.push(Column {
            sum,
            carry_in: carry == 1,
        });
        carry = sum / 10;
    }
    out
}

pub(crate) fn correct_steps(a: &str, b: &str, state: &InterfaceState) -> Vec<HintPackage> {
    let cols = columns(a, b);
    let n = cols.len();
    for (k, c) in cols.iter().enumerate() {
        let i = k + 1;
        let out = format!("out{i}");
        let carry = format!("carry{i}");
        let ina = format!("inpA{i}");
        let inb = format!("inpB{i}");
        let prev = format!("carry{}", i - 1);
        let mut foci = vec![ina.as_str(), inb.as_str()];
        if c.carry_in {
            foci.push(prev.as_str());
        }
        let three = c.carry_in;
        let mut steps = Vec::new();
        if !filled(state, &out) {
            steps.push(step(&out, (c.sum % 10).to_string(), &foci, if three { "add3" } else { "add2" }));
        }
        if c.sum >= 10 && !filled(state, &carry) {
            steps.push(step(&carry, (c.sum / 10).to_string(), &foci, if three { "carry3" } else { "carry2" }));
        }
        if !steps.is_empty() {
            return steps;
        }
    }
    if cols[n - 1].sum >= 10 {
        let out = format!("out{}", n + 1);
        if !filled(state, &out) {
            let carry = format!("carry{n}");
            return vec![step(&out, "1", &[carry.as_str()], "final-carry")];
        }
    }
    vec![done_step()]
}

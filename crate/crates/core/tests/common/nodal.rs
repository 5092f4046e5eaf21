//! Dense nodal Newton–Raphson load flow, used only as a test oracle.
//!
//! Each phase is solved as an independent single-phase network built from its
//! own bus admittance matrix, in polar coordinates with an analytic Jacobian.
//! Nothing here calls into the sweep solver.

#![allow(dead_code)]

use std::collections::BTreeMap;

use evgrid_core::model::{Feeder, PhaseSet};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct C {
    pub re: f64,
    pub im: f64,
}

impl C {
    fn new(re: f64, im: f64) -> Self {
        C { re, im }
    }
    fn inv(self) -> Self {
        let d = self.re * self.re + self.im * self.im;
        C::new(self.re / d, -self.im / d)
    }
    fn add(self, o: C) -> C {
        C::new(self.re + o.re, self.im + o.im)
    }
    fn neg(self) -> C {
        C::new(-self.re, -self.im)
    }
}

/// Per-bus per-phase voltage (magnitude, angle) from the oracle.
pub type Solution = BTreeMap<(String, usize), (f64, f64)>;

const X_OVER_R: f64 = 2.0;

fn mask(p: PhaseSet) -> [bool; 3] {
    let mut m = [false; 3];
    for ph in p.iter() {
        m[ph.index()] = true;
    }
    m
}

/// Solves `feeder` with per-bus demand `bus_kw_kvar` (kW, kvar; keyed by bus id)
/// split equally over each bus's phases.
pub fn solve(
    feeder: &Feeder,
    bus_kw_kvar: &BTreeMap<String, (f64, f64)>,
    s_base_kva: f64,
) -> Solution {
    let kv: BTreeMap<&str, f64> = feeder
        .buses
        .iter()
        .map(|b| (b.id.as_str(), b.nominal_voltage_kv))
        .collect();
    let phases: BTreeMap<&str, [bool; 3]> = feeder
        .buses
        .iter()
        .map(|b| (b.id.as_str(), mask(b.phases)))
        .collect();
    // (from, to, phase mask, series impedance pu)
    let mut branches: Vec<(String, String, [bool; 3], C)> = Vec::new();
    for l in &feeder.lines {
        let base = kv[l.from_bus.as_str()].powi(2) * 1000.0 / s_base_kva;
        let z = C::new(
            l.resistance_ohm_per_mi * l.length_mi / base,
            l.reactance_ohm_per_mi * l.length_mi / base,
        );
        branches.push((l.from_bus.clone(), l.to_bus.clone(), mask(l.phases), z));
    }
    for t in &feeder.transformers {
        let zmag = t.impedance_pct / 100.0;
        let r = zmag / (1.0 + X_OVER_R * X_OVER_R).sqrt();
        let scale = s_base_kva / (t.rating_kva / t.phase_count as f64);
        branches.push((
            t.from_bus.clone(),
            t.to_bus.clone(),
            phases[t.to_bus.as_str()],
            C::new(r * scale, r * X_OVER_R * scale),
        ));
    }
    let source = feeder
        .buses
        .iter()
        .find(|b| b.is_source)
        .unwrap()
        .id
        .clone();
    let mut out = Solution::new();
    for p in 0..3 {
        let ids: Vec<&str> = feeder
            .buses
            .iter()
            .filter(|b| phases[b.id.as_str()][p])
            .map(|b| b.id.as_str())
            .collect();
        let idx: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let n = ids.len();
        let mut y = vec![vec![C::default(); n]; n];
        for (a, b, m, z) in &branches {
            if !m[p] {
                continue;
            }
            let (i, j) = (idx[a.as_str()], idx[b.as_str()]);
            let yy = z.inv();
            y[i][i] = y[i][i].add(yy);
            y[j][j] = y[j][j].add(yy);
            y[i][j] = y[i][j].add(yy.neg());
            y[j][i] = y[j][i].add(yy.neg());
        }
        let slack = idx[source.as_str()];
        let slack_angle = [
            0.0,
            -2.0 * std::f64::consts::PI / 3.0,
            2.0 * std::f64::consts::PI / 3.0,
        ][p];
        let mut p_spec = vec![0.0; n];
        let mut q_spec = vec![0.0; n];
        for (i, id) in ids.iter().enumerate() {
            if let Some(&(kw, kvar)) = bus_kw_kvar.get(*id) {
                let count = phases[id].iter().filter(|x| **x).count() as f64;
                p_spec[i] = -kw / count / s_base_kva;
                q_spec[i] = -kvar / count / s_base_kva;
            }
        }
        let mut vm = vec![1.0; n];
        let mut va = vec![slack_angle; n];
        let unknown: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
        let m = unknown.len();
        for _ in 0..50 {
            let (pc, qc) = injections(&y, &vm, &va);
            let mut f = vec![0.0; 2 * m];
            for (k, &i) in unknown.iter().enumerate() {
                f[k] = pc[i] - p_spec[i];
                f[m + k] = qc[i] - q_spec[i];
            }
            if f.iter().all(|x| x.abs() < 1e-13) {
                break;
            }
            let mut jac = vec![vec![0.0; 2 * m]; 2 * m];
            for (r, &i) in unknown.iter().enumerate() {
                for (c, &j) in unknown.iter().enumerate() {
                    let (g, b) = (y[i][j].re, y[i][j].im);
                    if i == j {
                        jac[r][c] = -qc[i] - b * vm[i] * vm[i];
                        jac[r][m + c] = pc[i] / vm[i] + g * vm[i];
                        jac[m + r][c] = pc[i] - g * vm[i] * vm[i];
                        jac[m + r][m + c] = qc[i] / vm[i] - b * vm[i];
                    } else {
                        let t = va[i] - va[j];
                        let (s, co) = t.sin_cos();
                        jac[r][c] = vm[i] * vm[j] * (g * s - b * co);
                        jac[r][m + c] = vm[i] * (g * co + b * s);
                        jac[m + r][c] = -vm[i] * vm[j] * (g * co + b * s);
                        jac[m + r][m + c] = vm[i] * (g * s - b * co);
                    }
                }
            }
            let dx = gauss(jac, f.iter().map(|x| -x).collect());
            for (k, &i) in unknown.iter().enumerate() {
                va[i] += dx[k];
                vm[i] += dx[m + k];
            }
        }
        for (i, id) in ids.iter().enumerate() {
            out.insert((id.to_string(), p), (vm[i], va[i]));
        }
    }
    out
}

fn injections(y: &[Vec<C>], vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = vm.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let (g, b) = (y[i][j].re, y[i][j].im);
            if g == 0.0 && b == 0.0 {
                continue;
            }
            let (s, c) = (va[i] - va[j]).sin_cos();
            p[i] += vm[i] * vm[j] * (g * c + b * s);
            q[i] += vm[i] * vm[j] * (g * s - b * c);
        }
    }
    (p, q)
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}
